"""Outage analysis of multi-RIS THz links under turbulence and misalignment."""

__version__ = "0.1.0"
