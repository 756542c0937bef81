"""
anonpool - Anonymous Repeated Participation Package
"""

__version__ = "1.0.0"
__author__ = "Research Team"
__description__ = (
    "Simulator and auditor for anonymous, repeated participation in multi-party computations"
)
