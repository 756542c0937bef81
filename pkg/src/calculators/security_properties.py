#!/usr/bin/env python3
"""
Security Property Calculator
Exact values of the anonymity and unlinkability guarantees, and the
security surface report that collects them next to the measured tallies
of a simulation.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional


def anonymity_probability(parties: int, corrupt: int) -> Fraction:
    """Chance of linking an honest pseudonym to its identity: 1/(P - C)."""
    if corrupt < 0 or parties < 1:
        raise ValueError("party and corruption counts must be non-negative")
    if corrupt >= parties:
        raise ValueError(f"need fewer corrupted parties than parties (P={parties}, C={corrupt})")
    return Fraction(1, parties - corrupt)


def unlinkability_probability(threshold: int, corrupt: int) -> Fraction:
    """Chance that two pool pseudonyms are linked to one honest party: 1/(T - C)."""
    if corrupt < 0 or threshold < 2:
        raise ValueError("threshold must be at least 2 and corruption count non-negative")
    if corrupt >= threshold:
        raise ValueError(f"need fewer corrupted parties than the threshold (T={threshold}, C={corrupt})")
    return Fraction(1, threshold - corrupt)


@dataclass
class SecuritySurfaceReport:
    parties: int
    corrupt: int
    threshold: int
    permutation_equal: Optional[bool] = None
    replay_rejections: int = 0
    replay_attempts: int = 0
    impersonation_rejections: int = 0
    impersonation_attempts: int = 0

    @property
    def anonymity_denominator(self) -> int:
        return self.parties - self.corrupt

    @property
    def unlinkability_denominator(self) -> int:
        return self.threshold - self.corrupt

    @property
    def anonymity(self) -> Fraction:
        return anonymity_probability(self.parties, self.corrupt)

    @property
    def unlinkability(self) -> Fraction:
        return unlinkability_probability(self.threshold, self.corrupt)

    def to_dict(self) -> Dict:
        return {
            "parties": self.parties,
            "corrupt": self.corrupt,
            "threshold": self.threshold,
            "anonymity": {
                "denominator": self.anonymity_denominator,
                "probability": str(self.anonymity),
                "value": float(self.anonymity),
            },
            "unlinkability": {
                "denominator": self.unlinkability_denominator,
                "probability": str(self.unlinkability),
                "value": float(self.unlinkability),
            },
            "transcript_permutation_equal": self.permutation_equal,
            "replay": {"rejected": self.replay_rejections, "attempts": self.replay_attempts},
            "impersonation": {
                "rejected": self.impersonation_rejections,
                "attempts": self.impersonation_attempts,
            },
        }
