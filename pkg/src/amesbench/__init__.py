"""Regression toolkit and benchmark harness for tabular house-price data."""

__version__ = "0.1.0"
