"""Cell-level data valuation with out-of-bag estimates from subset bagging."""

__version__ = "0.1.0"
