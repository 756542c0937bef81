"""
Integration tests for CLI workflows.

Tests end-to-end functionality through the command-line interface:
scenario runs with their saved artifacts, catalogued attacks, board
audits and the security property printout.
"""

import json
import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from main import main


def run_cli(monkeypatch, *args):
    monkeypatch.setattr("sys.argv", ["main.py", *args])
    main()


class TestRunWorkflow:
    """Test suite for the run command."""

    def test_run_honest_scenario(self, test_data_dir, temp_output_dir, monkeypatch, capsys):
        run_cli(monkeypatch, "--output", temp_output_dir, "run", str(test_data_dir / "honest_5_3.json"))

        captured = capsys.readouterr()
        assert "SCENARIO: honest_5_3" in captured.out
        assert "Verdicts: Success" in captured.out
        assert "F run 1: sum 60 (ok)" in captured.out
        assert "📦 EVENT LOG SAVED" in captured.out
        assert "📦 BOARD DUMP SAVED" in captured.out
        assert "📄 REPORT GENERATED" in captured.out
        assert "✅ Outcome matches the scenario expectation" in captured.out

        output = Path(temp_output_dir)
        for name in ("events.jsonl", "board.dump", "report.json"):
            assert (output / name).exists()

        with open(output / "report.json", "r", encoding="utf-8") as f:
            report = json.load(f)
        assert report["expectation"] == {"met": True, "mismatches": []}
        assert report["outcome"]["functionality"][0]["outputs"] == {"p1": 60, "p2": 60, "p3": 60}

    def test_run_attack_scenario(self, test_data_dir, temp_output_dir, monkeypatch, capsys):
        run_cli(monkeypatch, "--output", temp_output_dir, "run", str(test_data_dir / "lie_bit_up.json"))
        captured = capsys.readouterr()
        assert "Verdicts: BanParty:p4:lied_in_check" in captured.out
        assert "✅" in captured.out

    def test_run_unmet_expectation_exits(self, test_data_dir, temp_output_dir, monkeypatch, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "--output", temp_output_dir, "run", str(test_data_dir / "wrong_expectation.json"))
        assert excinfo.value.code == 1
        captured = capsys.readouterr()
        assert "⚠️  verdicts: expected" in captured.out
        assert (Path(temp_output_dir) / "report.json").exists()

    def test_run_missing_scenario(self, temp_output_dir, monkeypatch, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "--output", temp_output_dir, "run", "/nonexistent/scenario.json")
        assert excinfo.value.code == 1
        assert "run failed" in capsys.readouterr().out

    def test_run_invalid_scenario(self, test_data_dir, temp_output_dir, monkeypatch, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "--output", temp_output_dir, "run", str(test_data_dir / "invalid_threshold.json"))
        assert excinfo.value.code == 1
        assert "invalid scenario" in capsys.readouterr().out

    def test_event_log_is_reproducible(self, test_data_dir, tmp_path, monkeypatch):
        for name in ("first", "second"):
            run_cli(monkeypatch, "--output", str(tmp_path / name), "run", str(test_data_dir / "honest_5_3.json"))
        first = (tmp_path / "first" / "events.jsonl").read_bytes()
        second = (tmp_path / "second" / "events.jsonl").read_bytes()
        assert first == second


class TestAttackWorkflow:
    """Test suite for the attack command."""

    def test_attack_detected(self, temp_output_dir, monkeypatch, capsys):
        run_cli(monkeypatch, "--output", temp_output_dir, "attack", "forged-reveal", "--seed", "2")
        captured = capsys.readouterr()
        assert "ATTACK: forged-reveal (seed 2)" in captured.out
        assert "Expected: BanParty:p4:invalid_signature" in captured.out
        assert "Observed: BanParty:p4:invalid_signature" in captured.out
        assert "✅ Detected as catalogued" in captured.out

        report = json.loads((Path(temp_output_dir) / "report.json").read_text(encoding="utf-8"))
        assert report["attack"]["match"] is True

    def test_list_attacks(self, monkeypatch, capsys):
        run_cli(monkeypatch, "attack", "--list-attacks")
        captured = capsys.readouterr()
        assert "Available Attacks:" in captured.out
        assert "colluding-pair-swap" in captured.out
        assert "UndetectedByDesign" in captured.out

    def test_attack_id_required(self, monkeypatch, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "attack")
        assert excinfo.value.code == 1
        assert "attack id is required" in capsys.readouterr().out

    def test_unknown_attack(self, temp_output_dir, monkeypatch, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "--output", temp_output_dir, "attack", "teleport")
        assert excinfo.value.code == 1
        assert "unknown attack" in capsys.readouterr().out


class TestAuditWorkflow:
    """Test suite for auditing saved boards."""

    def test_audit_clean_board(self, test_data_dir, temp_output_dir, monkeypatch, capsys):
        run_cli(monkeypatch, "--output", temp_output_dir, "run", str(test_data_dir / "honest_5_3.json"))
        capsys.readouterr()

        run_cli(monkeypatch, "audit", str(Path(temp_output_dir) / "board.dump"))
        captured = capsys.readouterr()
        assert "Board entries: 12" in captured.out
        assert "✅ All audit checks pass" in captured.out

    def test_audit_attacked_board(self, temp_output_dir, monkeypatch, capsys):
        run_cli(monkeypatch, "--output", temp_output_dir, "attack", "skip-deprecation")
        capsys.readouterr()

        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "audit", str(Path(temp_output_dir) / "board.dump"))
        assert excinfo.value.code == 1
        assert "Audit check 3 failed" in capsys.readouterr().out

    def test_audit_missing_dump(self, monkeypatch, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "audit", "/nonexistent/board.dump")
        assert excinfo.value.code == 1
        assert "Board dump not found" in capsys.readouterr().out


class TestPropsWorkflow:
    """Test suite for the props command."""

    def test_props(self, monkeypatch, capsys):
        run_cli(monkeypatch, "props", "--parties", "5", "--corrupt", "2", "--threshold", "4")
        captured = capsys.readouterr()
        assert "Anonymity:     1/(|P|-|C|) = 1/3" in captured.out
        assert "Unlinkability: 1/(T-|C|)   = 1/2" in captured.out

    def test_props_too_many_corrupted(self, monkeypatch, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch, "props", "--parties", "3", "--corrupt", "3", "--threshold", "4")
        assert excinfo.value.code == 1
        assert "props failed" in capsys.readouterr().out

    @pytest.mark.slow
    def test_props_measured(self, monkeypatch, capsys):
        args = ["props", "--parties", "5", "--corrupt", "1", "--threshold", "3", "--measure", "--trials", "3"]
        run_cli(monkeypatch, *args)
        captured = capsys.readouterr()
        assert "Replay rejected: 3/3" in captured.out
        assert "Impersonation rejected: 3/3" in captured.out
        assert "Transcript permutation equal: True" in captured.out


class TestGeneralOptions:
    """Test suite for top-level options."""

    def test_list_profiles(self, monkeypatch, capsys):
        run_cli(monkeypatch, "--list-profiles")
        captured = capsys.readouterr()
        assert "Available Group Profiles:" in captured.out
        assert "sim" in captured.out
        assert "64 bits" in captured.out

    def test_command_required(self, monkeypatch):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(monkeypatch)
        assert excinfo.value.code == 2
