#!/usr/bin/env python3
"""
Attack Catalog
Every attack the harness can inject, the scenario that exercises it and
the detection outcome the protocol must produce.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional

from harness.adversary import COORDINATOR_ATTACKS, UnknownAttackError
from harness.scenario import Scenario, SimulationConfig, parse_scenario
from harness.simulation import Simulation, SimulationOutcome, run_simulation
from models.bulletin_board import AuditCheck
from protocol.messages import RejectReason
from protocol.sanity_check import Cause, VerdictKind

logger = logging.getLogger(__name__)


class OutcomeKind(Enum):
    AUDIT_VIOLATION = "audit_violation"
    VERDICT = "verdict"
    REJECTED = "rejected"
    UNDETECTED = "undetected_by_design"


@dataclass(frozen=True)
class DetectionOutcome:
    kind: OutcomeKind
    check: Optional[AuditCheck] = None
    verdict: Optional[VerdictKind] = None
    cause: Optional[Cause] = None
    culprit: Optional[str] = None
    reason: Optional[RejectReason] = None
    seq: Optional[int] = None

    @property
    def label(self) -> str:
        if self.kind == OutcomeKind.AUDIT_VIOLATION:
            return f"AuditViolation:{self.check.value}"
        if self.kind == OutcomeKind.VERDICT:
            parts = [self.verdict.value] + [p for p in (self.culprit, self.cause and self.cause.value) if p]
            return ":".join(parts)
        if self.kind == OutcomeKind.REJECTED:
            return f"Rejected:{self.reason.value}"
        return "UndetectedByDesign"

    def matches(self, observed: "DetectionOutcome") -> bool:
        """Field-wise match; fields left None here are not compared."""
        if self.kind != observed.kind:
            return False
        for name in ("check", "verdict", "cause", "culprit", "reason"):
            wanted = getattr(self, name)
            if wanted is not None and wanted != getattr(observed, name):
                return False
        return True

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "label": self.label, "seq": self.seq}


@dataclass(frozen=True)
class AttackSpec:
    attack_id: str
    description: str
    expected: DetectionOutcome
    # (action, actor) pairs; "{actor}" / "{target}" fill in the attacker and accomplice
    script: tuple
    actor: str = "coordinator"
    target: Optional[str] = None


def _ban(cause: Cause, culprit: str) -> DetectionOutcome:
    return DetectionOutcome(OutcomeKind.VERDICT, verdict=VerdictKind.BAN_PARTY, cause=cause, culprit=culprit)


def _malicious(cause: Cause) -> DetectionOutcome:
    return DetectionOutcome(OutcomeKind.VERDICT, verdict=VerdictKind.COORDINATOR_MALICIOUS, cause=cause)


def _audit(check: AuditCheck) -> DetectionOutcome:
    return DetectionOutcome(OutcomeKind.AUDIT_VIOLATION, check=check)


def _rejected(reason: RejectReason) -> DetectionOutcome:
    return DetectionOutcome(OutcomeKind.REJECTED, reason=reason)


REGISTER_ALL = ("register:p1", "register:p2", "register:p3", "register:p4", "register:p5")
ONE_ROUND = ("request:p1", "request:p2", "request:p3", "advance")
INJECT = ("inject",)


class AttackCatalog:
    """Attack ids mapped to their scenario and expected detection outcome."""

    ATTACKS: Dict[str, AttackSpec] = {
        spec.attack_id: spec
        for spec in (
            AttackSpec(
                "sign-for-unregistered",
                "coordinator pools a pseudonym it signed for nobody, via the request path",
                _malicious(Cause.ORPHAN_PSEUDONYM),
                REGISTER_ALL + INJECT + ("request:p1", "request:p2", "advance"),
            ),
            AttackSpec(
                "double-sign-one-party",
                "coordinator gives a second pseudonym to a colluding party who pools both",
                _malicious(Cause.ORPHAN_PSEUDONYM),
                REGISTER_ALL + INJECT + ("request:p1", "request:p2", "advance"),
                target="p1",
            ),
            AttackSpec(
                "pool-add-without-request",
                "coordinator appends a self-signed pseudonym to the pool directly",
                _malicious(Cause.ORPHAN_PSEUDONYM),
                REGISTER_ALL + INJECT + ("request:p1", "request:p2", "advance"),
            ),
            AttackSpec(
                "skip-deprecation",
                "coordinator pools pseudonyms without deprecating them",
                _audit(AuditCheck.POOL_DEPRECATED),
                REGISTER_ALL + INJECT + ONE_ROUND,
            ),
            AttackSpec(
                "reuse-deprecated",
                "coordinator re-adds a pseudonym that was already pooled",
                _audit(AuditCheck.POOL_PSEUDONYM_VALID),
                REGISTER_ALL + ONE_ROUND + INJECT + ("advance",),
            ),
            AttackSpec(
                "skip-ban",
                "coordinator ignores a BanParty verdict against a lying party",
                _audit(AuditCheck.MALICIOUS_REMOVED),
                REGISTER_ALL + INJECT + ONE_ROUND,
                target="p4",
            ),
            AttackSpec(
                "invalid-token-registration",
                "coordinator registers an identity without a valid token",
                _audit(AuditCheck.TOKEN_VALID),
                REGISTER_ALL + INJECT + ("advance",),
            ),
            AttackSpec(
                "lie-bit-up",
                "an auditor claims pool membership in the check",
                _ban(Cause.LIED_IN_CHECK, "p4"),
                REGISTER_ALL + INJECT + ONE_ROUND,
                actor="p4",
            ),
            AttackSpec(
                "lie-bit-down",
                "a pool member denies membership in the check",
                _ban(Cause.LIED_IN_CHECK, "p1"),
                REGISTER_ALL + INJECT + ONE_ROUND,
                actor="p1",
            ),
            AttackSpec(
                "refuse-reveal",
                "a lying party refuses to reveal its pseudonym",
                _ban(Cause.REFUSED_REVEAL, "p4"),
                REGISTER_ALL + INJECT + ONE_ROUND,
                actor="p4",
            ),
            AttackSpec(
                "forged-reveal",
                "a lying party reveals a pseudonym with a forged signature",
                _ban(Cause.INVALID_SIGNATURE, "p4"),
                REGISTER_ALL + INJECT + ONE_ROUND,
                actor="p4",
            ),
            AttackSpec(
                "invalid-bit-proof",
                "a party posts a contribution whose bit proof does not verify",
                _ban(Cause.INVALID_PROOF, "p4"),
                REGISTER_ALL + INJECT + ONE_ROUND,
                actor="p4",
            ),
            AttackSpec(
                "replay-pseudonym",
                "a party resubmits its already pooled pseudonym",
                _rejected(RejectReason.REPLAY),
                REGISTER_ALL + INJECT + ("request:p1", "advance", "request:p1", "advance") + ONE_ROUND[1:],
                actor="p1",
            ),
            AttackSpec(
                "forged-signature-request",
                "a party requests with a pseudonym the coordinator never signed",
                _rejected(RejectReason.BAD_SIGNATURE),
                REGISTER_ALL + INJECT + ("request:p1", "advance") + ONE_ROUND,
                actor="p1",
            ),
            AttackSpec(
                "wrong-token-registration",
                "a party registers with another identity's token",
                _rejected(RejectReason.INVALID_TOKEN),
                INJECT + REGISTER_ALL + ONE_ROUND,
                actor="p5",
                target="p1",
            ),
            AttackSpec(
                "colluding-pair-swap",
                "one colluder pools the other's pseudonym and the other claims membership",
                DetectionOutcome(OutcomeKind.UNDETECTED),
                REGISTER_ALL + INJECT + ("request:p1", "request:p2", "advance"),
                actor="p1",
                target="p4",
            ),
        )
    }

    @classmethod
    def get(cls, attack_id: str) -> AttackSpec:
        if attack_id not in cls.ATTACKS:
            raise UnknownAttackError(f"unknown attack {attack_id!r}; choose from {cls.list_attacks()}")
        return cls.ATTACKS[attack_id]

    @classmethod
    def list_attacks(cls) -> List[str]:
        return sorted(cls.ATTACKS)

    @classmethod
    def by_actor(cls, coordinator: bool) -> List[str]:
        return [a for a in cls.list_attacks() if (a in COORDINATOR_ATTACKS) == coordinator]


def attack_scenario(attack_id: str, seed: int = 0, profile: str = "sim") -> Scenario:
    """Five parties, pool threshold three, with the attack injected at its catalogued step."""
    spec = AttackCatalog.get(attack_id)
    script = []
    for item in spec.script:
        if item == "inject":
            script.append({"action": "inject", "attack": attack_id, "actor": spec.actor, "target": spec.target})
            continue
        action, _, actor = item.partition(":")
        script.append({"action": action, "actor": actor} if actor else {"action": action})
    return parse_scenario(
        {"name": attack_id, "seed": seed, "parties": 5, "threshold": 3, "profile": profile, "script": script}
    )


def observed_outcome(outcome: SimulationOutcome, attacker: Optional[str] = None) -> DetectionOutcome:
    """What the honest parties saw: audit violations first, then verdicts, then rejections."""
    first = outcome.first_audit_violation()
    if first is not None:
        return DetectionOutcome(OutcomeKind.AUDIT_VIOLATION, check=first.check, seq=first.seq)
    for verdict in outcome.verdicts:
        if verdict.kind != VerdictKind.SUCCESS:
            return DetectionOutcome(
                OutcomeKind.VERDICT, verdict=verdict.kind, cause=verdict.cause, culprit=verdict.identity
            )
    for identity, reason in outcome.rejections:
        if attacker is None or identity == attacker:
            return DetectionOutcome(OutcomeKind.REJECTED, reason=RejectReason(reason), culprit=identity)
    return DetectionOutcome(OutcomeKind.UNDETECTED)


@dataclass
class AttackResult:
    attack_id: str
    seed: int
    expected: DetectionOutcome
    observed: DetectionOutcome
    simulation: Simulation

    @property
    def detected_as_expected(self) -> bool:
        return self.expected.matches(self.observed)

    def to_dict(self) -> dict:
        return {
            "attack": self.attack_id,
            "seed": self.seed,
            "expected": self.expected.to_dict(),
            "observed": self.observed.to_dict(),
            "match": self.detected_as_expected,
            "outcome": self.simulation.outcome.to_dict(),
        }


def run_attack(attack_id: str, seed: int = 0, profile: str = "sim") -> AttackResult:
    spec = AttackCatalog.get(attack_id)
    scenario = attack_scenario(attack_id, seed, profile)
    simulation = run_simulation(scenario.to_config(), scenario.script)
    attacker = None if spec.actor == "coordinator" else spec.actor
    observed = observed_outcome(simulation.outcome, attacker)
    result = AttackResult(attack_id, seed, spec.expected, observed, simulation)
    if not result.detected_as_expected:
        logger.warning("%s: expected %s, observed %s", attack_id, spec.expected.label, observed.label)
    return result


def run_repeated_lies(liars: List[str], seed: int = 0, parties: int = 6, threshold: int = 2) -> Simulation:
    """Every liar keeps lying; each failed check bans exactly one of them.

    Rounds continue until a check succeeds, so the run ends after at most
    len(liars) failed checks.
    """
    config = SimulationConfig(seed=seed, parties=parties, threshold=threshold)
    identities = config.identities()
    honest = [i for i in identities if i not in liars]
    script: List[dict] = [{"action": "register", "actor": i} for i in identities]
    script += [{"action": "inject", "attack": "lie-bit-up", "actor": liar} for liar in liars]
    for _ in range(len(liars) + 1):
        script += [{"action": "request", "actor": i} for i in honest[:threshold]]
        script.append({"action": "advance"})
    scenario = parse_scenario(
        {"name": "repeated-lies", "seed": seed, "parties": parties, "threshold": threshold, "script": script}
    )
    return run_simulation(config, scenario.script)
