"""Forward models and spectrum inversion for spin-ensemble / resonator hybrids."""

__version__ = "0.1.0"
