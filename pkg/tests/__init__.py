"""MeshCore Hub test suite."""
