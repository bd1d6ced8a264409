"""Data component tests."""
