"""Model component tests."""
