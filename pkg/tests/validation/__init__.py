"""Acceptance tests for the protocol guarantees."""
