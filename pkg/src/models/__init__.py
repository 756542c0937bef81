"""
Board, network, identity and party models
"""
