"""
Quantile-frequency analysis diagnostics for GARCH-type volatility models.
"""

__version__ = "0.1.0"
