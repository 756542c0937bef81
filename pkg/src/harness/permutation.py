#!/usr/bin/env python3
"""
Permutation Test
Re-runs a scenario with honest identities permuted and compares what the
adversary observes: the coordinator's anonymous-channel transcript, the
pool and deprecation entries of the board, and the deliveries seen by
corrupted parties. Equal views mean the anonymous side carries nothing
that depends on which identity acted.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from harness.adversary import CorruptedParty, corrupted_identities
from harness.scenario import COORDINATOR_ACTOR, Scenario, ScenarioAction
from harness.simulation import Simulation, run_simulation
from models.bulletin_board import EntryKind

OBSERVED_KINDS = (EntryKind.POOL_ADD, EntryKind.DEPRECATE)


class PreconditionViolation(ValueError):
    """The permutation moves a corrupted identity or is not a bijection."""


def adversary_view(simulation: Simulation) -> List[str]:
    lines = [
        json.dumps(record, sort_keys=True)
        for record in simulation.coordinator.transcript
        if record["channel"] == "anon"
    ]
    for entry in simulation.coordinator.board.entries:
        if entry.kind in OBSERVED_KINDS:
            lines.append(f"{entry.kind.value}:{entry.payload.hex()}")
    for identity in simulation.identities:
        party = simulation.parties[identity]
        if isinstance(party, CorruptedParty):
            lines.extend(f"{identity}:{json.dumps(view, sort_keys=True)}" for view in party.views)
    return lines


@dataclass
class PermutationResult:
    permutation: Dict[str, str]
    original: List[str] = field(default_factory=list)
    permuted: List[str] = field(default_factory=list)

    @property
    def identical(self) -> bool:
        return self.original == self.permuted

    def first_difference(self) -> Optional[int]:
        for index, (a, b) in enumerate(zip(self.original, self.permuted)):
            if a != b:
                return index
        if len(self.original) != len(self.permuted):
            return min(len(self.original), len(self.permuted))
        return None

    def to_dict(self) -> dict:
        return {
            "permutation": self.permutation,
            "identical": self.identical,
            "observed_lines": len(self.original),
            "first_difference": self.first_difference(),
        }


def check_permutation(identities: List[str], permutation: Mapping[str, str], corrupted) -> Dict[str, str]:
    full = {identity: permutation.get(identity, identity) for identity in identities}
    if sorted(full.values()) != sorted(identities) or set(permutation) - set(identities):
        raise PreconditionViolation("permutation must be a bijection on the scenario identities")
    moved = sorted(c for c in corrupted if full[c] != c)
    if moved:
        raise PreconditionViolation(f"permutation moves corrupted identities {moved}")
    return full


def _rename(step: ScenarioAction, mapping: Mapping[str, str]) -> ScenarioAction:
    def rename(name: Optional[str]) -> Optional[str]:
        if name is None or name == COORDINATOR_ACTOR:
            return name
        return mapping.get(name, name)

    return step.model_copy(update={"actor": rename(step.actor), "target": rename(step.target)})


def transcript_permutation_test(scenario: Scenario, permutation: Mapping[str, str]) -> PermutationResult:
    identities = scenario.identities()
    corrupted, _ = corrupted_identities(scenario.script)
    mapping = check_permutation(identities, permutation, corrupted)

    config = scenario.to_config()
    original = run_simulation(config, scenario.script, identities, scenario.inputs)
    permuted = run_simulation(
        config,
        [_rename(step, mapping) for step in scenario.script],
        [mapping[i] for i in identities],
        {mapping.get(k, k): v for k, v in scenario.inputs.items()},
    )
    return PermutationResult(
        permutation=mapping,
        original=adversary_view(original),
        permuted=adversary_view(permuted),
    )


def parse_permutation(text: str) -> Dict[str, str]:
    """'p1=p3,p3=p1' -> {'p1': 'p3', 'p3': 'p1'}"""
    mapping: Dict[str, str] = {}
    for pair in filter(None, (part.strip() for part in text.split(","))):
        source, sep, target = pair.partition("=")
        if not sep or not source or not target:
            raise PreconditionViolation(f"bad permutation pair {pair!r}")
        mapping[source.strip()] = target.strip()
    return mapping
