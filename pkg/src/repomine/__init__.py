"""Variant-configurable git mining pipeline with replication studies."""

__version__ = "0.1.0"
