#!/usr/bin/env python3
"""
Scenario Schema
Scenario files are JSON documents validated with pydantic. A scenario fixes
the seed and sizes of a run, an ordered script of actions and, optionally,
the outcome it is expected to produce.
"""

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from primitives.group_profiles import GroupProfile

COORDINATOR_ACTOR = "coordinator"


class ScenarioError(ValueError):
    """Raised for scenario files that cannot be read or fail validation."""


@dataclass(frozen=True)
class SimulationConfig:
    seed: int = 0
    parties: int = 5
    threshold: int = 3
    profile: str = GroupProfile.DEFAULT
    step_budget: int = 64
    modulus: int = 2**31 - 1
    rounds: int = 1

    def identities(self) -> List[str]:
        return [f"p{i}" for i in range(1, self.parties + 1)]


class ActionKind(str, Enum):
    REGISTER = "register"
    REQUEST = "request"
    ADVANCE = "advance"
    INJECT = "inject"


class ScenarioAction(BaseModel):
    model_config = ConfigDict(extra="forbid")

    action: ActionKind
    actor: Optional[str] = None
    attack: Optional[str] = None
    target: Optional[str] = Field(None, description="second party an attack involves")

    @model_validator(mode="after")
    def check_arguments(self) -> "ScenarioAction":
        if self.action in (ActionKind.REGISTER, ActionKind.REQUEST) and not self.actor:
            raise ValueError(f"{self.action.value} needs an actor")
        if self.action == ActionKind.INJECT and not self.attack:
            raise ValueError("inject needs an attack id")
        return self


class ScenarioExpectation(BaseModel):
    model_config = ConfigDict(extra="forbid")

    verdicts: Optional[List[str]] = Field(None, description="verdict labels in order, e.g. BanParty:p4:lied_in_check")
    audit_check: Optional[Union[int, str]] = Field(None, description="audit check id of the first violation")
    rejections: Optional[List[str]] = None
    final_states: Dict[str, str] = Field(default_factory=dict)


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    seed: int = 0
    parties: int = Field(5, ge=1)
    threshold: int = Field(3, ge=2)
    profile: str = GroupProfile.DEFAULT
    step_budget: int = Field(64, ge=1)
    modulus: int = Field(2**31 - 1, ge=2)
    rounds: int = Field(1, ge=1, description="pool rounds the script covers")
    inputs: Dict[str, int] = Field(default_factory=dict)
    script: List[ScenarioAction] = Field(default_factory=list)
    expect: Optional[ScenarioExpectation] = None

    @field_validator("profile")
    @classmethod
    def known_profile(cls, value: str) -> str:
        if value not in GroupProfile.PROFILES:
            raise ValueError(f"unknown profile {value!r}; choose from {sorted(GroupProfile.PROFILES)}")
        return value

    def identities(self) -> List[str]:
        return self.to_config().identities()

    def to_config(self) -> SimulationConfig:
        return SimulationConfig(
            seed=self.seed,
            parties=self.parties,
            threshold=self.threshold,
            profile=self.profile,
            step_budget=self.step_budget,
            modulus=self.modulus,
            rounds=self.rounds,
        )


def parse_scenario(data: dict) -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(f"invalid scenario: {e}") from e


def load_scenario(path: str) -> Scenario:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    return parse_scenario(data)


def honest_scenario(config: SimulationConfig, name: str = "honest") -> Scenario:
    """Everyone registers; each round the next T parties (cyclically) request, then advance."""
    identities = config.identities()
    script: List[dict] = [{"action": "register", "actor": identity} for identity in identities]
    cursor = 0
    for _ in range(config.rounds):
        for _ in range(config.threshold):
            script.append({"action": "request", "actor": identities[cursor % len(identities)]})
            cursor += 1
        script.append({"action": "advance"})
    return parse_scenario(
        {
            "name": name,
            "seed": config.seed,
            "parties": config.parties,
            "threshold": config.threshold,
            "profile": config.profile,
            "step_budget": config.step_budget,
            "modulus": config.modulus,
            "rounds": config.rounds,
            "script": script,
        }
    )
