"""Reporting-checklist recommendation and completion with local language models."""

__version__ = "0.1.0"
