"""Desk-scale plant monitoring toolkit.

A hardware-free pipeline from simulated sensors through calibration,
filtering, adaptive sampling and irrigation control, with store-and-forward
telemetry into a small channel-based ingest service. Ships a scenario
runner for multi-day experiments and policy comparisons, plus an HTTP
facade over the ingest service.
"""

__version__ = "0.1.0"
