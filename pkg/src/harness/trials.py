#!/usr/bin/env python3
"""
Security Surface Trials
Repeated replay and impersonation attempts against a fresh coordinator,
and the security surface report that puts their tallies next to the exact
anonymity and unlinkability values.
"""

import logging
from typing import Optional, Tuple

from calculators.security_properties import SecuritySurfaceReport
from harness.permutation import transcript_permutation_test
from harness.scenario import SimulationConfig, honest_scenario
from models.anon_net import Router
from models.identity_provider import IdentityProvider
from models.party import Party
from primitives.substrate import GroupParams, Rng
from protocol.coordinator import Coordinator
from protocol.messages import RegistrationRejected, RejectReason, RequestRejected

logger = logging.getLogger(__name__)

# large enough that a single request never triggers a sanity check
TRIAL_THRESHOLD = 1 << 20


def _fresh_service(params: GroupParams, rng: Rng) -> Tuple[Router, IdentityProvider, Coordinator]:
    router = Router(rng.fork("router"))
    identity_provider = IdentityProvider(params, rng.fork("identity-provider"))
    coordinator = Coordinator(params, rng.fork("coordinator"), router, TRIAL_THRESHOLD, identity_provider.public_key)
    return router, identity_provider, coordinator


def _settle(router: Router, coordinator: Coordinator, party: Party) -> Optional[RejectReason]:
    rejected = None
    while router.in_flight:
        router.flush()
        coordinator.process_inbox()
        try:
            party.pump()
        except RequestRejected as e:
            rejected = e.reason
    return rejected


def replay_trial(params: GroupParams, rng: Rng) -> Optional[RejectReason]:
    """Pool one pseudonym, then submit it again; returns the rejection reason."""
    router, identity_provider, coordinator = _fresh_service(params, rng)
    party = Party(
        "replayer",
        0,
        params,
        router,
        rng.fork("party"),
        coordinator.public_key,
        identity_provider.public_key,
        token=identity_provider.issue_token("replayer"),
    )
    party.do_register(coordinator)
    held = party.current
    party.do_request()
    if _settle(router, coordinator, party) is not None:
        return None
    party.send_commit(held)
    return _settle(router, coordinator, party)


def impersonation_trial(params: GroupParams, rng: Rng) -> Optional[RejectReason]:
    """Present another identity's token at registration; returns the rejection reason."""
    router, identity_provider, coordinator = _fresh_service(params, rng)
    victim_token = identity_provider.issue_token("victim")
    identity_provider.issue_token("impostor")
    impostor = Party(
        "impostor",
        1,
        params,
        router,
        rng.fork("party"),
        coordinator.public_key,
        identity_provider.public_key,
        token=victim_token,
    )
    try:
        coordinator.begin_registration("impostor", victim_token, impostor.public_key)
    except RegistrationRejected as e:
        return e.reason
    return None


def replay_trials(params: GroupParams, trials: int, seed: int = 0) -> Tuple[int, int]:
    root = Rng.from_int(seed).fork("replay-trials")
    rejected = sum(
        1 for t in range(trials) if replay_trial(params, root.fork(str(t))) == RejectReason.REPLAY
    )
    return rejected, trials


def impersonation_trials(params: GroupParams, trials: int, seed: int = 0) -> Tuple[int, int]:
    root = Rng.from_int(seed).fork("impersonation-trials")
    rejected = sum(
        1
        for t in range(trials)
        if impersonation_trial(params, root.fork(str(t))) == RejectReason.INVALID_TOKEN
    )
    return rejected, trials


def measure_security_surface(
    params: GroupParams,
    parties: int,
    corrupt: int,
    threshold: int,
    trials: int = 10,
    seed: int = 0,
    profile: str = "sim",
) -> SecuritySurfaceReport:
    """Exact property values plus measured tallies and one identity-swap transcript test."""
    report = SecuritySurfaceReport(parties=parties, corrupt=corrupt, threshold=threshold)
    report.replay_rejections, report.replay_attempts = replay_trials(params, trials, seed)
    report.impersonation_rejections, report.impersonation_attempts = impersonation_trials(params, trials, seed)

    if parties >= 2 and parties >= threshold:
        scenario = honest_scenario(SimulationConfig(seed=seed, parties=parties, threshold=threshold, profile=profile))
        result = transcript_permutation_test(scenario, {"p1": "p2", "p2": "p1"})
        report.permutation_equal = result.identical
    logger.info("security surface measured over %d trials", trials)
    return report
