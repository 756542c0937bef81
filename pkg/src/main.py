#!/usr/bin/env python3
"""
anonpool - Main CLI Application

Runs scenarios of the anonymous pool service, injects catalogued attacks,
replays the audit checks over a saved board and prints the anonymity and
unlinkability values for given party, corruption and threshold counts.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

# Add the src directory to Python path for imports
sys.path.insert(0, str(Path(__file__).parent))

from calculators.security_properties import anonymity_probability, unlinkability_probability
from generators.report_generator import ReportGenerator
from harness.attacks import AttackCatalog, run_attack
from harness.scenario import load_scenario
from harness.simulation import expectation_mismatches, run_simulation
from harness.trials import measure_security_surface
from models.bulletin_board import audit_dump, load_dump
from primitives.group_profiles import GroupProfile
from primitives.substrate import FieldDecodeError, InvalidGroupParams, Rng


def create_output_directories(base_output_dir: str) -> None:
    """Create output directory if it doesn't exist."""
    Path(base_output_dir).mkdir(parents=True, exist_ok=True)


def print_saved(paths: dict) -> None:
    print(f"\n📦 EVENT LOG SAVED: {paths['events']}")
    print(f"📦 BOARD DUMP SAVED: {paths['board']}")
    print(f"📄 REPORT GENERATED: {paths['report']}")


def command_run(args: argparse.Namespace, output_dir: str) -> None:
    scenario = load_scenario(args.scenario)
    print("=" * 80)
    print(f"SCENARIO: {scenario.name}")
    print("=" * 80)
    print(f"Seed: {scenario.seed} | Parties: {scenario.parties} | Threshold: {scenario.threshold}")
    print(f"Profile: {scenario.profile} | Script steps: {len(scenario.script)}")

    simulation = run_simulation(scenario.to_config(), scenario.script, inputs=scenario.inputs)
    outcome = simulation.outcome
    mismatches = expectation_mismatches(scenario, outcome)

    print(f"\nVerdicts: {', '.join(outcome.verdict_labels) or 'none'}")
    first = outcome.first_audit_violation()
    if first is not None:
        print(f"Audit violation: check {first.check.value} at seq {first.seq} ({first.detail})")
    for round_ in outcome.functionality:
        status = "ok" if round_.correct else "WRONG"
        print(f"F run {round_.run_id}: sum {round_.expected} ({status})")
    print("Final states: " + ", ".join(f"{k}={v}" for k, v in sorted(outcome.final_states.items())))

    generator = ReportGenerator(simulation, scenario.name)
    extra = {"expectation": {"met": not mismatches, "mismatches": mismatches}}
    print_saved(generator.save_all(output_dir, extra))

    if mismatches:
        for problem in mismatches:
            print(f"⚠️  {problem}")
        sys.exit(1)
    if scenario.expect is not None:
        print("\n✅ Outcome matches the scenario expectation")


def command_attack(args: argparse.Namespace, output_dir: str) -> None:
    if args.list_attacks:
        print("Available Attacks:")
        print("-" * 50)
        for attack_id in AttackCatalog.list_attacks():
            spec = AttackCatalog.get(attack_id)
            print(f"  {attack_id:<28} {spec.expected.label}")
            print(f"  {'':<28} {spec.description}")
        return
    if not args.attack_id:
        raise ValueError("attack id is required unless using --list-attacks")

    print("=" * 80)
    print(f"ATTACK: {args.attack_id} (seed {args.seed})")
    print("=" * 80)
    result = run_attack(args.attack_id, seed=args.seed, profile=args.profile)
    print(f"Expected: {result.expected.label}")
    print(f"Observed: {result.observed.label}")

    generator = ReportGenerator(result.simulation, args.attack_id)
    print_saved(generator.save_all(output_dir, {"attack": result.to_dict()}))

    if not result.detected_as_expected:
        print("⚠️  Attack outcome differs from the catalog")
        sys.exit(1)
    print("\n✅ Detected as catalogued")


def command_audit(args: argparse.Namespace) -> None:
    if not os.path.exists(args.dump):
        print(f"Error: Board dump not found at {args.dump}")
        sys.exit(1)
    try:
        dump = load_dump(args.dump)
    except (FieldDecodeError, InvalidGroupParams) as e:
        print(f"Error: unreadable board dump: {e}")
        sys.exit(1)
    verdict = audit_dump(dump)
    print(f"Board entries: {len(dump.entries)}")
    if verdict.ok:
        print("✅ All audit checks pass")
        return
    print(f"⚠️  Audit check {verdict.check.value} failed at seq {verdict.seq}: {verdict.detail}")
    sys.exit(1)


def command_props(args: argparse.Namespace) -> None:
    anonymity = anonymity_probability(args.parties, args.corrupt)
    unlinkability = unlinkability_probability(args.threshold, args.corrupt)
    print(f"Parties |P| = {args.parties}, corrupted |C| = {args.corrupt}, threshold T = {args.threshold}")
    print(f"Anonymity:     1/(|P|-|C|) = {anonymity}")
    print(f"Unlinkability: 1/(T-|C|)   = {unlinkability}")

    if args.measure:
        params = GroupProfile.build(args.profile, Rng.from_int(args.seed).fork("group"))
        report = measure_security_surface(
            params, args.parties, args.corrupt, args.threshold, args.trials, args.seed, args.profile
        )
        print(f"Replay rejected: {report.replay_rejections}/{report.replay_attempts}")
        print(f"Impersonation rejected: {report.impersonation_rejections}/{report.impersonation_attempts}")
        print(f"Transcript permutation equal: {report.permutation_equal}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anonpool",
        description="Anonymous repeated participation in multi-party computations - simulator and auditor",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run a scenario and write events.jsonl, board.dump and report.json
  python main.py run ../tests/test_data/honest_5_3.json

  # Inject a catalogued attack with a given seed
  python main.py attack lie-bit-up --seed 7

  # Replay every audit check over a saved board
  python main.py audit ../output/board.dump

  # Anonymity and unlinkability values
  python main.py props --parties 5 --corrupt 2 --threshold 4

  # Show available group profiles
  python main.py --list-profiles
        """,
    )
    parser.add_argument(
        "--output",
        default=None,
        help="Output directory for reports and logs (default: project root/output)",
    )
    parser.add_argument("--log-level", default="WARNING", help="Logging level (default: WARNING)")
    parser.add_argument("--list-profiles", action="store_true", help="List available group profiles and exit")

    commands = parser.add_subparsers(dest="command")

    run = commands.add_parser("run", help="Run a scenario file")
    run.add_argument("scenario", help="Path to scenario JSON")

    attack = commands.add_parser("attack", help="Run one catalogued attack")
    attack.add_argument("attack_id", nargs="?", help="Attack id (see --list-attacks)")
    attack.add_argument("--seed", type=int, default=0, help="Root seed (default: 0)")
    attack.add_argument("--profile", default=GroupProfile.DEFAULT, help="Group profile (default: sim)")
    attack.add_argument("--list-attacks", action="store_true", help="List catalogued attacks and exit")

    audit = commands.add_parser("audit", help="Replay audit checks over a board dump")
    audit.add_argument("dump", help="Path to board dump")

    props = commands.add_parser("props", help="Print anonymity and unlinkability values")
    props.add_argument("--parties", type=int, required=True, help="Registered parties |P|")
    props.add_argument("--corrupt", type=int, required=True, help="Corrupted parties |C|")
    props.add_argument("--threshold", type=int, required=True, help="Pool threshold T")
    props.add_argument("--measure", action="store_true", help="Also run replay, impersonation and permutation trials")
    props.add_argument("--trials", type=int, default=10, help="Trials per measured property (default: 10)")
    props.add_argument("--seed", type=int, default=0, help="Root seed for measured trials (default: 0)")
    props.add_argument("--profile", default=GroupProfile.DEFAULT, help="Group profile for measured trials")
    return parser


def main() -> None:
    parser = build_parser()
    args = parser.parse_args()

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.list_profiles:
        GroupProfile.list_profiles()
        return

    if not args.command:
        parser.error("a command is required unless using --list-profiles")

    # Determine output directory (always absolute path, never inside src)
    if args.output:
        output_dir = os.path.abspath(args.output)
    else:
        project_root = Path(__file__).parent.parent
        output_dir = str(project_root / "output")

    try:
        if args.command == "run":
            create_output_directories(output_dir)
            command_run(args, output_dir)
        elif args.command == "attack":
            create_output_directories(output_dir)
            command_attack(args, output_dir)
        elif args.command == "audit":
            command_audit(args)
        elif args.command == "props":
            command_props(args)
    except SystemExit:
        raise
    except Exception as e:
        print(f"\n⚠️  {args.command} failed: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
