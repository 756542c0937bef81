#!/usr/bin/env python3
"""
Simulation
Deterministic single-process run of the whole service: one seeded root
randomness source, one router as the only serialization point, parties
polled in slot order. Identical scenarios produce byte-identical event logs.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from harness import adversary
from harness.scenario import COORDINATOR_ACTOR, ActionKind, Scenario, ScenarioAction, SimulationConfig
from models.anon_net import Router
from models.bulletin_board import AuditVerdict, SanityBoard
from models.identity_provider import IdentityProvider
from models.party import LocalMisuseError, Party
from models.party_states import PartyEvent, PartyState
from primitives.group_profiles import GroupProfile
from primitives.substrate import Rng
from protocol.coordinator import Coordinator, SanityCheckRun
from protocol.functionality import SecureSumAborted, SecureSumMember, compute_f_secure_sum
from protocol.messages import RequestRejected
from protocol.sanity_check import SanityRun, SanityStall, Verdict, VerdictKind, conduct_sanity_check

logger = logging.getLogger(__name__)


class UnknownActorError(KeyError):
    """A scenario names an actor that is not part of the run."""


@dataclass
class FunctionalityRound:
    run_id: int
    expected: int
    outputs: Dict[str, int] = field(default_factory=dict)

    @property
    def correct(self) -> bool:
        return all(value == self.expected for value in self.outputs.values())

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "expected": self.expected, "outputs": self.outputs, "correct": self.correct}


@dataclass
class SimulationOutcome:
    verdicts: List[Verdict] = field(default_factory=list)
    runs: List[SanityRun] = field(default_factory=list)
    audit_violations: Dict[str, AuditVerdict] = field(default_factory=dict)
    rejections: List[Tuple[str, str]] = field(default_factory=list)
    final_states: Dict[str, str] = field(default_factory=dict)
    functionality: List[FunctionalityRound] = field(default_factory=list)
    corrupted_pool_counts: List[int] = field(default_factory=list)
    stalls: List[str] = field(default_factory=list)
    abandoned: bool = False

    @property
    def verdict_labels(self) -> List[str]:
        return [v.label for v in self.verdicts]

    def first_audit_violation(self) -> Optional[AuditVerdict]:
        found = [v for v in self.audit_violations.values() if v.seq is not None]
        return min(found, key=lambda v: v.seq) if found else None

    def to_dict(self) -> dict:
        first = self.first_audit_violation()
        return {
            "verdicts": self.verdict_labels,
            "runs": [run.to_dict() for run in self.runs],
            "audit_violations": {k: v.to_dict() for k, v in sorted(self.audit_violations.items())},
            "first_audit_violation": None if first is None else first.to_dict(),
            "rejections": [{"identity": i, "reason": r} for i, r in self.rejections],
            "final_states": dict(sorted(self.final_states.items())),
            "functionality": [r.to_dict() for r in self.functionality],
            "corrupted_pool_counts": self.corrupted_pool_counts,
            "stalls": self.stalls,
            "abandoned": self.abandoned,
        }


class Simulation:
    """Owns every actor of one run and drives them step by step."""

    def __init__(
        self,
        config: SimulationConfig,
        identities: Optional[Sequence[str]] = None,
        corrupted: Iterable[str] = (),
        malicious_coordinator: bool = False,
        inputs: Optional[Dict[str, int]] = None,
    ):
        self.config = config
        self.identities = list(identities) if identities is not None else config.identities()
        if len(set(self.identities)) != len(self.identities):
            raise ValueError("identities must be distinct")
        self.inputs = dict(inputs or {})
        corrupted = set(corrupted)
        unknown = corrupted - set(self.identities)
        if unknown:
            raise UnknownActorError(sorted(unknown)[0])

        root = Rng.from_int(config.seed)
        self.params = GroupProfile.build(config.profile, root.fork("group"))
        self.router = Router(root.fork("router"), config.step_budget)
        self.identity_provider = IdentityProvider(self.params, root.fork("identity-provider"))
        coordinator_cls = adversary.MaliciousCoordinator if malicious_coordinator else Coordinator
        self.coordinator: Coordinator = coordinator_cls(
            self.params, root.fork("coordinator"), self.router, config.threshold, self.identity_provider.public_key
        )

        party_rng = root.fork("parties")
        self.parties: Dict[str, Party] = {}
        for slot, identity in enumerate(self.identities):
            party_cls = adversary.CorruptedParty if identity in corrupted else Party
            self.parties[identity] = party_cls(
                identity,
                slot,
                self.params,
                self.router,
                party_rng,
                self.coordinator.public_key,
                self.identity_provider.public_key,
                token=self.identity_provider.issue_token(identity),
            )

        self._author_keys: Dict[str, int] = {}
        self.sanity_board = SanityBoard(self.params, self._author_keys)
        self._f_rng = root.fork("functionality")
        self.outcome = SimulationOutcome()
        self.events: List[dict] = []
        self._router_cursor = 0
        self._board_cursor = 0
        self._log(
            "genesis",
            seed=config.seed,
            threshold=config.threshold,
            params=self.params.to_dict(),
            coordinator_key=str(self.coordinator.public_key),
            issuer_key=str(self.identity_provider.public_key),
            identities=self.identities,
        )

    # Event log

    def _log(self, event: str, **fields) -> None:
        self.events.append({"step": len(self.events), "event": event, **fields})

    def _sync_logs(self) -> None:
        for router_event in self.router.events[self._router_cursor :]:
            fields = {k: v for k, v in router_event.items() if k != "event"}
            self._log(f"router:{router_event['event']}", **fields)
        self._router_cursor = len(self.router.events)
        for entry in self.coordinator.board.entries[self._board_cursor :]:
            self._log("board", seq=entry.seq, kind=entry.kind.value, hash=entry.entry_hash.hex())
        self._board_cursor = len(self.coordinator.board.entries)

    def event_log_lines(self) -> List[str]:
        self._sync_logs()
        return [json.dumps(event, sort_keys=True) for event in self.events]

    # Helpers

    def party(self, identity: str) -> Party:
        if identity not in self.parties:
            raise UnknownActorError(identity)
        return self.parties[identity]

    def _in_slot_order(self) -> List[Party]:
        return [self.parties[i] for i in self.identities]

    def _refresh_author_keys(self) -> None:
        self._author_keys.clear()
        for identity, record in self.coordinator.board.registered().items():
            if identity in self.coordinator.board.active_identities():
                self._author_keys[identity] = record.public_key

    def _abandon(self, reason: str) -> None:
        if not self.outcome.abandoned:
            logger.warning("service abandoned: %s", reason)
            self._log("abandoned", reason=reason)
        self.outcome.abandoned = True

    # Actions

    def register(self, identity: str) -> bool:
        party = self.party(identity)
        accepted = party.do_register(self.coordinator)
        if accepted:
            self._refresh_author_keys()
        else:
            self.outcome.rejections.append((identity, party.rejections[-1].value))
        self._log("register", identity=identity, accepted=accepted)
        self.audit_all()
        return accepted

    def request(self, identity: str) -> bool:
        party = self.party(identity)
        try:
            party.do_request()
        except LocalMisuseError as e:
            logger.info("request skipped: %s", e)
            self._log("request", identity=identity, sent=False, detail=str(e))
            return False
        self._log("request", identity=identity, sent=True)
        return True

    def inject(self, attack: str, actor: Optional[str], target: Optional[str] = None) -> None:
        self._log("inject", attack=attack, actor=actor, target=target)
        adversary.arm(self, attack, actor if actor != COORDINATOR_ACTOR else None, target)
        self._refresh_author_keys()
        self.audit_all()

    def advance(self) -> int:
        """Pump until nothing is in flight; returns the number of steps taken."""
        steps = 0
        while steps < self.config.step_budget and not self.outcome.abandoned:
            steps += 1
            self.router.flush()
            self.coordinator.process_inbox()
            for party in self._in_slot_order():
                try:
                    party.pump()
                except RequestRejected as e:
                    self.outcome.rejections.append((party.identity, e.reason.value))
            self._sync_logs()
            self.audit_all()
            if self.outcome.abandoned:
                break
            if self.router.in_flight:
                continue
            # quiescent: nothing left in flight, safe to start a check
            run = self.coordinator.maybe_trigger_sanity()
            if run is None:
                break
            self.run_sanity(run)
        self._sync_logs()
        return steps

    def run_script(self, script: Sequence[ScenarioAction]) -> SimulationOutcome:
        for step in script:
            if self.outcome.abandoned:
                self._log("skipped", action=step.action.value, actor=step.actor)
                continue
            if step.action == ActionKind.REGISTER:
                self.register(step.actor)
            elif step.action == ActionKind.REQUEST:
                self.request(step.actor)
            elif step.action == ActionKind.ADVANCE:
                self.advance()
            elif step.action == ActionKind.INJECT:
                self.inject(step.attack, step.actor, step.target)
        self.advance()
        return self.finish()

    def finish(self) -> SimulationOutcome:
        self.outcome.final_states = {identity: p.state.value for identity, p in self.parties.items()}
        self._sync_logs()
        return self.outcome

    # Auditing

    def audit_all(self) -> None:
        for party in self._in_slot_order():
            if not party.is_active:
                continue
            verdict = party.do_audit(self.coordinator.board)
            self._note_violation(party, verdict)

    def _settle_all(self) -> None:
        for party in self._in_slot_order():
            if party.is_active:
                self._note_violation(party, party.settle_audit())

    def _note_violation(self, party: Party, verdict: AuditVerdict) -> None:
        if verdict.ok or party.identity in self.outcome.audit_violations:
            return
        self.outcome.audit_violations[party.identity] = verdict
        self._log("audit_violation", identity=party.identity, **verdict.to_dict())
        self._abandon(f"audit check {verdict.check.value} failed")

    # Sanity check

    def run_sanity(self, run: SanityCheckRun) -> Optional[SanityRun]:
        self._sync_logs()
        self.audit_all()
        if self.outcome.abandoned:
            return None

        participants = [p for p in self._in_slot_order() if p.identity in run.roster and p.is_active]
        for party in participants:
            party.machine.fire(PartyEvent.POOL_THRESHOLD)
        self._log("sanity_start", run_id=run.run_id, board_count=run.board_count, roster=list(run.roster))

        try:
            result = conduct_sanity_check(
                self.params,
                participants,
                run.pool,
                run.board_count,
                self.sanity_board,
                run.run_id,
                self.coordinator.public_key,
            )
        except SanityStall as e:
            self.outcome.stalls.append(e.identity)
            self.coordinator.complete_check()
            self._abandon(str(e))
            return None

        if result.count is not None:
            for party in participants:
                self.coordinator.receive_count(run, party.identity, result.count)
        verdict = result.verdict
        self.outcome.runs.append(result)
        self.outcome.verdicts.append(verdict)
        self.outcome.corrupted_pool_counts.append(self._corrupted_pool_count(run))
        self._log("verdict", run_id=run.run_id, count=result.count, **verdict.to_dict())

        if verdict.kind == VerdictKind.SUCCESS:
            self._on_success(run, participants)
        elif verdict.kind == VerdictKind.BAN_PARTY:
            self._on_ban(run, result, participants)
        else:
            for party in participants:
                party.machine.fire(PartyEvent.COORDINATOR_MALICIOUS)
            self.coordinator.complete_check()
            self._abandon(verdict.label)
        return result

    def _corrupted_pool_count(self, run: SanityCheckRun) -> int:
        urls = set(run.onion_urls)
        return sum(
            1 for p in self.parties.values() if p.corrupted for url in p.held if url in urls
        )

    def _on_success(self, run: SanityCheckRun, participants: List[Party]) -> None:
        for party in participants:
            party.machine.fire(PartyEvent.CHECK_SUCCESS)
        members = [p for p in participants if p.state == PartyState.COMPUTING_F]
        self.compute_functionality(run, members)
        for party in members:
            party.machine.fire(PartyEvent.COMPUTATION_DONE)
        self.coordinator.issue_renewals(run.onion_urls)
        self.coordinator.complete_check()

    def compute_functionality(self, run: SanityCheckRun, members: List[Party]) -> Optional[FunctionalityRound]:
        """F over the pool pseudonyms: one secure-sum member per pooled URL."""
        pool_urls = set(run.onion_urls)
        f_members: List[SecureSumMember] = []
        owners: Dict[bytes, str] = {}
        expected = 0
        rng = self._f_rng.fork("run", str(run.run_id))
        for party in members:
            urls = [url for url in party.held if url in pool_urls]
            for k, url in enumerate(urls):
                value = self.inputs.get(party.identity, party.slot + 1) if k == 0 else 0
                f_members.append(SecureSumMember(url, value, rng.fork("slot", str(party.slot), str(k))))
                owners[url] = party.identity
                expected += value
        if len(f_members) < 2:
            logger.warning("too few pool members to compute F")
            return None

        try:
            outputs = compute_f_secure_sum(self.router, f_members, self.config.modulus)
        except SecureSumAborted as e:
            logger.warning("%s", e)
            return None
        round_ = FunctionalityRound(run.run_id, expected % self.config.modulus)
        for url, value in outputs.items():
            round_.outputs.setdefault(owners[url], value)
        self.outcome.functionality.append(round_)
        self._sync_logs()
        self._log("functionality", **round_.to_dict())
        return round_

    def _on_ban(self, run: SanityCheckRun, result: SanityRun, participants: List[Party]) -> None:
        culprit = result.verdict.identity
        for party in participants:
            party.auditor.expect_ban(culprit)
        self.coordinator.ban(culprit)
        self.coordinator.deprecate_revealed([reveal.pseudonym for reveal in result.reveals.values()])
        self.coordinator.dissolve_pool(run.onion_urls)
        self._refresh_author_keys()
        self._sync_logs()
        self.audit_all()
        self._settle_all()
        if self.outcome.abandoned:
            self.coordinator.complete_check()
            return

        for party in participants:
            if party.identity == culprit:
                party.machine.fire(PartyEvent.SELF_BANNED)
            else:
                party.machine.fire(PartyEvent.OTHER_BANNED)

        remaining = [p for p in participants if p.state == PartyState.AUDITING]
        requests = [p.prepare_post_failure_renewal(self.coordinator) for p in remaining]
        responses = self.coordinator.post_failure_renewals(requests)
        for party in remaining:
            if party.identity in responses:
                party.finish_post_failure_renewal(*responses[party.identity])
            else:
                logger.warning("%s received no post-failure renewal", party.identity)
        self.coordinator.complete_check()


def run_simulation(
    config: SimulationConfig,
    script: Sequence[ScenarioAction],
    identities: Optional[Sequence[str]] = None,
    inputs: Optional[Dict[str, int]] = None,
) -> Simulation:
    corrupted, malicious = adversary.corrupted_identities(script)
    simulation = Simulation(config, identities, corrupted, malicious, inputs)
    names = set(simulation.identities) | {COORDINATOR_ACTOR}
    for step in script:
        for name in (step.actor, step.target):
            if name is not None and name not in names:
                raise UnknownActorError(name)
    simulation.run_script(script)
    return simulation


def run_scenario(scenario: Scenario) -> Tuple[List[str], SimulationOutcome]:
    """Run a scenario; returns the event log lines and the outcome."""
    simulation = run_simulation(scenario.to_config(), scenario.script, inputs=scenario.inputs)
    return simulation.event_log_lines(), simulation.outcome


def expectation_mismatches(scenario: Scenario, outcome: SimulationOutcome) -> List[str]:
    """Differences between a scenario's expect block and what happened."""
    expect = scenario.expect
    if expect is None:
        return []
    problems: List[str] = []
    if expect.verdicts is not None and expect.verdicts != outcome.verdict_labels:
        problems.append(f"verdicts: expected {expect.verdicts}, got {outcome.verdict_labels}")
    if expect.audit_check is not None:
        first = outcome.first_audit_violation()
        got = None if first is None else first.check.value
        if str(got) != str(expect.audit_check):
            problems.append(f"audit check: expected {expect.audit_check}, got {got}")
    if expect.rejections is not None:
        got = [reason for _, reason in outcome.rejections]
        if expect.rejections != got:
            problems.append(f"rejections: expected {expect.rejections}, got {got}")
    for identity, state in expect.final_states.items():
        got = outcome.final_states.get(identity)
        if got != state:
            problems.append(f"final state of {identity}: expected {state}, got {got}")
    return problems
