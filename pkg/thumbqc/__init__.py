"""Fixation-type prediction (FFPE vs. frozen section) from slide thumbnails."""

__version__ = "0.1.0"
