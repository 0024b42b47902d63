"""Balance forecasting and recurring-charge mining for bank ledgers."""

__version__ = "0.1.0"
