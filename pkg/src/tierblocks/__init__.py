"""Workload-aware block generation and three-tier (cloud/edge/end) block scheduling."""

__version__ = "0.1.0"
