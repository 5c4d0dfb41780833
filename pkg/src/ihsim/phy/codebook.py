"""Activation-pattern codebooks for generalized spatial modulation.

A codebook holds the first ``2**bits_per_use`` k-subsets of ``range(n_tx)``
in lexicographic order. Patterns are produced by combinadic (un)ranking
so codebooks as large as C(64, 32) are never materialised. The remap
permutation is a keyed Feistel network over ``bits_per_use``-bit words,
which is a bijection for every word length and can be evaluated and
inverted one codeword at a time.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from ..errors import GuardError, ValidationError

ENUMERATION_LIMIT = 1 << 16
FEISTEL_ROUNDS = 6
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ActivationPattern:
    active: tuple[int, ...]

    def __post_init__(self):
        act = tuple(int(i) for i in self.active)
        if not act:
            raise ValidationError("pattern needs at least one active antenna", ["active"])
        if list(act) != sorted(set(act)) or act[0] < 0:
            raise ValidationError(f"pattern indices must be distinct, sorted, >= 0: {act}", ["active"])
        object.__setattr__(self, "active", act)

    @property
    def k(self) -> int:
        return len(self.active)

    def mask(self, n_tx: int) -> np.ndarray:
        if self.active[-1] >= n_tx:
            raise ValidationError(f"pattern {self.active} exceeds n_tx={n_tx}", ["active"])
        m = np.zeros(n_tx, dtype=bool)
        m[list(self.active)] = True
        return m


@lru_cache(maxsize=None)
def _comb(n: int, k: int) -> int:
    return math.comb(n, k)


def unrank_combination(rank: int, n: int, k: int) -> tuple[int, ...]:
    """The ``rank``-th k-subset of range(n) in lexicographic order."""
    out = []
    x = 0
    for slot in range(k, 0, -1):
        while True:
            c = _comb(n - x - 1, slot - 1)
            if rank < c:
                break
            rank -= c
            x += 1
        out.append(x)
        x += 1
    return tuple(out)


def rank_combination(active: Sequence[int], n: int) -> int:
    k = len(active)
    rank = 0
    prev = -1
    for slot, a in enumerate(active):
        for x in range(prev + 1, a):
            rank += _comb(n - x - 1, k - slot - 1)
        prev = a
    return rank


def _round_fn(key: int, epoch: int, rnd: int, value: int, out_bits: int) -> int:
    if out_bits == 0:
        return 0
    msg = b"".join(int(v & _MASK64).to_bytes(8, "little") for v in (epoch, rnd, value >> 64, value))
    digest = hashlib.blake2b(msg, key=int(key & _MASK64).to_bytes(8, "little"), digest_size=16).digest()
    return int.from_bytes(digest, "little") & ((1 << out_bits) - 1)


def feistel_permute(value: int, bits: int, key: int, epoch: int, inverse: bool = False) -> int:
    """Keyed bijection on ``bits``-bit integers.

    Alternating (unbalanced) Feistel: the word is split into a high part of
    ``ceil(bits/2)`` bits and a low part; each round maps ``(L, R)`` to
    ``(R, L ^ F(R))`` so the two halves swap widths every round. An even
    round count restores the original split.
    """
    if bits == 0:
        return 0
    lo_bits = bits // 2
    hi_bits = bits - lo_bits
    left, right = value >> lo_bits, value & ((1 << lo_bits) - 1)
    wl, wr = hi_bits, lo_bits
    if not inverse:
        for rnd in range(FEISTEL_ROUNDS):
            left, right = right, left ^ _round_fn(key, epoch, rnd, right, wl)
            wl, wr = wr, wl
    else:
        # after an even number of rounds the widths are back to (hi, lo)
        for rnd in reversed(range(FEISTEL_ROUNDS)):
            wl, wr = wr, wl
            left, right = right ^ _round_fn(key, epoch, rnd, left, wl), left
    return (left << wr) | right


@dataclass(frozen=True)
class PatternCodebook:
    """Truncated lexicographic codebook plus its current remap.

    ``remap`` is ``None`` for the identity permutation, otherwise the
    ``(key, epoch)`` pair seeding the Feistel permutation.
    """

    n_tx: int
    k: int
    bits_per_use: int
    remap: tuple[int, int] | None = None

    @property
    def size(self) -> int:
        return 1 << self.bits_per_use

    def __len__(self) -> int:
        return self.size

    def permute(self, value: int) -> int:
        if self.remap is None:
            return value
        return feistel_permute(value, self.bits_per_use, *self.remap)

    def unpermute(self, index: int) -> int:
        if self.remap is None:
            return index
        return feistel_permute(index, self.bits_per_use, *self.remap, inverse=True)

    @property
    def permutation(self) -> np.ndarray:
        """Materialised permutation (small codebooks only)."""
        self._guard()
        return np.array([self.permute(v) for v in range(self.size)], dtype=np.int64)

    def pattern(self, index: int) -> ActivationPattern:
        if not 0 <= index < self.size:
            raise ValidationError(f"codeword index {index} out of range", ["index"])
        return ActivationPattern(unrank_combination(index, self.n_tx, self.k))

    def index_of(self, pattern: ActivationPattern) -> int:
        if pattern.k != self.k or pattern.active[-1] >= self.n_tx:
            raise ValidationError(f"pattern {pattern.active} not in codebook", ["pattern"])
        idx = rank_combination(pattern.active, self.n_tx)
        if idx >= self.size:
            raise ValidationError(f"pattern {pattern.active} not in codebook", ["pattern"])
        return idx

    @property
    def patterns(self) -> list[ActivationPattern]:
        self._guard()
        return [self.pattern(i) for i in range(self.size)]

    def index_matrix(self) -> np.ndarray:
        """``(size, k)`` array of active antenna indices in codeword order."""
        return _index_matrix(self.n_tx, self.k, self.bits_per_use, self._guard())

    def _guard(self) -> int:
        if self.size > ENUMERATION_LIMIT:
            raise GuardError(
                f"codebook has {self.size} patterns (> {ENUMERATION_LIMIT}); "
                "enumeration refused, use se_bound_combinatorial instead"
            )
        return self.size


@lru_cache(maxsize=64)
def _index_matrix(n_tx: int, k: int, bits: int, size: int) -> np.ndarray:
    out = np.empty((size, k), dtype=np.int64)
    comb = [0] * k
    comb[:] = range(k)
    for row in range(size):
        out[row] = comb
        # advance to the next combination in lexicographic order
        i = k - 1
        while i >= 0 and comb[i] == n_tx - k + i:
            i -= 1
        if i < 0:
            break
        comb[i] += 1
        for j in range(i + 1, k):
            comb[j] = comb[j - 1] + 1
    out.setflags(write=False)
    return out


def build_codebook(n_tx: int, k: int) -> PatternCodebook:
    if not (1 <= k <= n_tx):
        raise ValidationError(f"need 1 <= k <= n_tx, got k={k}, n_tx={n_tx}", ["k"])
    total = math.comb(n_tx, k)
    return PatternCodebook(n_tx, k, total.bit_length() - 1)


def _bits_value(bits: Iterable[int]) -> list[int]:
    out = [int(b) for b in bits]
    if any(b not in (0, 1) for b in out):
        raise ValidationError("bits must be 0/1", ["bits"])
    return out


def bits_to_int(bits: Iterable[int]) -> int:
    v = 0
    for b in _bits_value(bits):
        v = (v << 1) | b
    return v


def int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def bits_to_pattern(bits: Sequence[int], cb: PatternCodebook) -> ActivationPattern:
    """Map a block of ``bits_per_use`` bits (MSB first) to its pattern."""
    bits = list(bits)
    if len(bits) != cb.bits_per_use:
        raise ValidationError(f"expected {cb.bits_per_use} bits, got {len(bits)}", ["bits"])
    return cb.pattern(cb.permute(bits_to_int(bits)))


def pattern_to_bits(p: ActivationPattern, cb: PatternCodebook) -> list[int]:
    return int_to_bits(cb.unpermute(cb.index_of(p)), cb.bits_per_use)


def remap_codebook(cb: PatternCodebook, key: int, frame_index: int, period: float) -> PatternCodebook:
    """Codebook with the permutation for the epoch containing ``frame_index``.

    ``period=math.inf`` disables remapping.
    """
    if not period >= 1:
        raise ValidationError(f"remap period must be >= 1, got {period}", ["period"])
    if math.isinf(period):
        return replace(cb, remap=None)
    epoch = int(frame_index) // int(period)
    return replace(cb, remap=(int(key) & _MASK64, epoch))
