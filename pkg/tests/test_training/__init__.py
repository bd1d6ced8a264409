"""Training component tests."""
