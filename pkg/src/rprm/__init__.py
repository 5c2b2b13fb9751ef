"""Review-property recommendation model with training and evaluation tools."""

__version__ = "0.1.0"
