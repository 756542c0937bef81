"""
Test suite for anonpool

Covers the cryptographic primitives, the board and network models, the
coordinator protocols, the simulation harness and the CLI.
"""
