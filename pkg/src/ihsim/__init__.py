"""Information-harvesting simulator: WPT, energy harvesters and information receivers."""

__version__ = "0.1.0"
