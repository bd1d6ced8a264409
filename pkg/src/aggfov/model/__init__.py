"""Aggregated field-of-view blocks and the hallucination network."""
