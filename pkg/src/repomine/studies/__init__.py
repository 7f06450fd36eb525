"""Replication study suites run on extracted facts."""
