"""Curl-curl magnetostatics with p-robust equilibrated error estimators."""

__version__ = "0.1.0"
