"""
Coordinator, sanity check and wire messages
"""
