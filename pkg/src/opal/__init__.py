"""OPAL: observe, plan, analyze, and execute database updates from text."""

__version__ = "0.1.0"
