"""Sidecar process serving one backend role over the qa-router file spool."""

__version__ = "0.1.0"
