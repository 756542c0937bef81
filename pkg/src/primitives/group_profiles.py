#!/usr/bin/env python3
"""
Group Parameter Profiles

Named group sizes for the simulator. Security is not the goal of any of
these sizes; they trade speed against how often hash collisions could show
up in randomized tests.
"""

from typing import Any, Dict

from primitives.substrate import GroupParams, Rng, setup_group


class GroupProfile:
    """Represents the supported group sizes and how to instantiate them."""

    PROFILES = {
        "toy": {
            "name": "Toy (16-bit)",
            "bit_length": 16,
            "description": "Exhaustive tests and hand-checkable arithmetic",
        },
        "sim": {
            "name": "Simulator (64-bit)",
            "bit_length": 64,
            "description": "Default for scenarios, attacks and acceptance runs",
        },
        "wide": {
            "name": "Wide (128-bit)",
            "bit_length": 128,
            "description": "Slower runs with negligible collision probability",
        },
    }

    DEFAULT = "sim"

    @classmethod
    def get_profile(cls, profile_name: str) -> Dict[str, Any]:
        """Get a group profile by name."""
        if profile_name not in cls.PROFILES:
            raise ValueError(f"Unknown group profile: {profile_name}")
        return cls.PROFILES[profile_name]

    @classmethod
    def get_all_profiles(cls) -> Dict[str, Dict[str, Any]]:
        """Get all available group profiles."""
        return cls.PROFILES.copy()

    @classmethod
    def list_profiles(cls) -> None:
        """Print formatted list of available group profiles."""
        print("Available Group Profiles:")
        print("-" * 50)
        for key, profile in cls.PROFILES.items():
            print(f"  {key:<6}: {profile['name']} ({profile['bit_length']} bits)")
            print(f"          {profile['description']}")
            print()

    @classmethod
    def build(cls, profile_name: str, rng: Rng) -> GroupParams:
        """Generate fresh group parameters for the named profile."""
        profile = cls.get_profile(profile_name)
        return setup_group(profile["bit_length"], rng)
