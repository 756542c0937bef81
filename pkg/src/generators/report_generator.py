#!/usr/bin/env python3
"""
Report Generator for anonpool runs

Writes the replay artifacts of a simulation (JSON-lines event log, board
dump) and a structured JSON report summarizing verdicts, audits, final
party states and functionality outputs.
"""

import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add parent directory to path for imports
sys.path.append(str(Path(__file__).parent.parent))

from harness.simulation import Simulation

TOOL_VERSION = "1.0.0"


class ReportGenerator:
    """Builds and saves the report of one simulation."""

    def __init__(self, simulation: Simulation, name: str = "scenario"):
        self.simulation = simulation
        self.name = name

    def generate_report(self, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        sim = self.simulation
        report = {
            "metadata": self._generate_metadata(),
            "board": self._generate_board_summary(),
            "outcome": sim.outcome.to_dict(),
            "parties": self._generate_party_summary(),
        }
        if extra:
            report.update(extra)
        return report

    def _generate_metadata(self) -> Dict[str, Any]:
        config = self.simulation.config
        return {
            "name": self.name,
            "tool_version": TOOL_VERSION,
            "seed": config.seed,
            "parties": len(self.simulation.identities),
            "threshold": config.threshold,
            "profile": config.profile,
            "params": self.simulation.params.to_dict(),
        }

    def _generate_board_summary(self) -> Dict[str, Any]:
        board = self.simulation.coordinator.board
        kinds: Dict[str, int] = {}
        for entry in board.entries:
            kinds[entry.kind.value] = kinds.get(entry.kind.value, 0) + 1
        return {
            "entries": len(board),
            "head_hash": board.head_hash.hex(),
            "chain_ok": board.verify_chain(),
            "by_kind": kinds,
            "active_identities": board.active_identities(),
            "deprecated": len(board.deprecated()),
        }

    def _generate_party_summary(self) -> List[Dict[str, Any]]:
        rows = []
        for identity in self.simulation.identities:
            party = self.simulation.parties[identity]
            rows.append(
                {
                    "identity": identity,
                    "slot": party.slot,
                    "state": party.state.value,
                    "corrupted": party.corrupted,
                    "held_pseudonyms": len(party.held),
                    "rejections": [r.value for r in party.rejections],
                    "events": [event.value for _, event, _ in party.machine.history],
                }
            )
        return rows

    def save_report(self, report: Dict[str, Any], output_path: str) -> str:
        Path(output_path).parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, ensure_ascii=False)
        return output_path

    def save_event_log(self, output_path: str) -> str:
        Path(output_path).parent.mkdir(parents=True, exist_ok=True)
        lines = self.simulation.event_log_lines()
        with open(output_path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        return output_path

    def save_board_dump(self, output_path: str) -> str:
        sim = self.simulation
        Path(output_path).parent.mkdir(parents=True, exist_ok=True)
        sim.coordinator.board.save_dump(output_path, sim.coordinator.public_key, sim.identity_provider.public_key)
        return output_path

    def save_all(self, output_dir: str, extra: Optional[Dict[str, Any]] = None) -> Dict[str, str]:
        """events.jsonl, board.dump and report.json under output_dir."""
        out = Path(output_dir)
        return {
            "events": self.save_event_log(str(out / "events.jsonl")),
            "board": self.save_board_dump(str(out / "board.dump")),
            "report": self.save_report(self.generate_report(extra), str(out / "report.json")),
        }

    @staticmethod
    def load_report(json_path: str) -> Dict[str, Any]:
        with open(json_path, "r", encoding="utf-8") as f:
            return json.load(f)
