"""Integration tests across multiple components."""
