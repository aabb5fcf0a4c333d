"""Lip-sync forgery detection from local/global mouth inconsistency."""

__version__ = "0.1.0"
