"""Cascaded real-time video anomaly detection engine."""

__version__ = "0.1.0"
