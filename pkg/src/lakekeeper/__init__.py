"""Desk-scale simulator of a surveyed, planned, and harvested weed lake."""

__version__ = "0.1.0"
