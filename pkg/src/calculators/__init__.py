"""
Security property calculators
"""
