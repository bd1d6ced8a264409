"""Common settings, logging and errors used by all components."""
