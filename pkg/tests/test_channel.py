import math

import numpy as np
import pytest

from ihsim.channel import (
    ChannelConfig,
    LinkGeometry,
    correlation_sqrt,
    draw_channel,
    draw_channels,
    noise_power_dbm,
    noise_power_w,
    path_loss_db,
    sample_shadowing,
    steering_vector,
)
from ihsim.errors import DomainError, ValidationError
from ihsim.geometry import ObstacleField, ObstacleSpec, Point3
from ihsim.rng import stream


def gain(d, cfg=ChannelConfig(), shadow=0.0):
    return 10.0 ** ((-path_loss_db(d) + cfg.array_gain_dbi + shadow) / 20.0)


def test_path_loss_values():
    assert path_loss_db(1000.0) == pytest.approx(128.1)
    assert path_loss_db(1.0) == pytest.approx(15.3)
    assert path_loss_db(20.0) == pytest.approx(64.22, abs=5e-3)


def test_path_loss_domain():
    for d in (0.0, -3.0):
        with pytest.raises(DomainError):
            path_loss_db(d)


def test_path_loss_increasing():
    d = np.geomspace(0.1, 5000, 200)
    pl = [path_loss_db(x) for x in d]
    assert all(a < b for a, b in zip(pl, pl[1:]))


def test_shadowing_moments():
    assert sample_shadowing(ChannelConfig(shadow_sigma_db=0.0), stream(1)) == 0.0
    s = sample_shadowing(ChannelConfig(), stream(1, "sh"), 100_000)
    assert 7.8 <= np.std(s, ddof=1) <= 8.2
    assert sample_shadowing(ChannelConfig(), stream(9)) == sample_shadowing(ChannelConfig(), stream(9))


def test_steering_vector():
    np.testing.assert_array_equal(steering_vector(8, 0.5, 0.0), np.ones(8))
    np.testing.assert_allclose(steering_vector(2, 0.5, math.pi / 2), [1, -1], atol=1e-12)
    v = steering_vector(16, 0.5, 0.3)
    np.testing.assert_allclose(np.abs(v), 1.0)


@pytest.mark.parametrize("n,rho", [(2, 0.7), (8, 0.3), (64, 0.7), (64, 0.95)])
def test_correlation_sqrt_reconstruction(n, rho):
    L = correlation_sqrt(n, rho)
    i = np.arange(n)
    R = rho ** np.abs(i[:, None] - i[None, :])
    assert np.max(np.abs(L @ L.conj().T - R)) < 1e-10


def test_correlation_sqrt_identity_and_range():
    np.testing.assert_array_equal(correlation_sqrt(5, 0.0), np.eye(5))
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ValidationError):
            correlation_sqrt(4, bad)


def test_noise_power():
    assert noise_power_dbm(ChannelConfig(subcarrier_bw=1.0)) == pytest.approx(-174.0)
    assert noise_power_dbm(ChannelConfig()) == pytest.approx(-132.24, abs=5e-3)
    assert noise_power_dbm(ChannelConfig(noise_figure_db=9.0)) == pytest.approx(-123.24, abs=5e-3)
    assert noise_power_w(ChannelConfig()) == pytest.approx(10 ** ((-132.2391 - 30) / 10), rel=1e-4)


def test_pure_los_boresight_is_deterministic():
    cfg = ChannelConfig(rician_k_db=math.inf, angle_offset_sigma=0.0)
    geom = LinkGeometry.at_distance(20.0)
    a = draw_channel(geom, True, cfg, stream(1), shadowing_db=0.0)
    b = draw_channel(geom, True, cfg, stream(2), shadowing_db=0.0)
    np.testing.assert_allclose(a.h, gain(20.0) * np.ones(64), rtol=1e-12)
    np.testing.assert_array_equal(a.h, b.h)


def test_nlos_power_and_correlation():
    geom = LinkGeometry.at_distance(5.0)
    g2 = gain(5.0) ** 2
    h, *_ = draw_channels(geom, False, ChannelConfig(n_tx=4, corr_coeff=0.0), stream(3), 100_000, shadowing_db=0.0)
    var = np.mean(np.abs(h) ** 2, axis=0)
    np.testing.assert_allclose(var, g2, rtol=0.02)

    h, *_ = draw_channels(geom, False, ChannelConfig(n_tx=4), stream(4), 100_000, shadowing_db=0.0)
    np.testing.assert_allclose(np.mean(np.abs(h) ** 2, axis=0), g2, rtol=0.02)
    c = (h.T @ h.conj()) / len(h) / g2
    for i in range(3):
        assert abs(c[i, i + 1].real - 0.7) <= 0.02
        assert abs(c[i, i + 1].imag) <= 0.02
    assert abs(c[0, 2].real - 0.49) <= 0.02


def test_los_and_nlos_from_field():
    geom = LinkGeometry(Point3(0, 0, 1.5), Point3(4, 0, 1.5))
    wall = ObstacleField.from_obstacles([(2.0, 0.0, 0.5, 10.0)])
    cfg = ChannelConfig(n_tx=4)
    assert draw_channel(geom, wall, cfg, stream(1)).los is False
    assert draw_channel(geom, ObstacleField.empty(), cfg, stream(1)).los is True
    assert draw_channel(geom, ObstacleSpec(ocr=0.0), cfg, stream(1)).los is True


def test_draw_channel_reproducible():
    geom = LinkGeometry.at_distance(7.0)
    cfg = ChannelConfig()
    a = draw_channel(geom, ObstacleSpec(), cfg, stream(42, "c"))
    b = draw_channel(geom, ObstacleSpec(), cfg, stream(42, "c"))
    assert a.h.tobytes() == b.h.tobytes()
    assert (a.los, a.shadowing_db, a.angle_offset) == (b.los, b.shadowing_db, b.angle_offset)
