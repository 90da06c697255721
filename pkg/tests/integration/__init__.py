"""Integration-level tests."""
