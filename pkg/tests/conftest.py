import hashlib
import json
from pathlib import Path

import pytest

from replimap.cli import main


def dir_digest(path) -> dict[str, str]:
    root = Path(path)
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


@pytest.fixture
def run_cli(capsys):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    def go(*argv):
        try:
            code = main([str(a) for a in argv])
        except SystemExit as e:  # argparse usage errors
            code = e.code
        out, err = capsys.readouterr()
        return code, out, err
    return go


@pytest.fixture
def tiny_inputs(tmp_path):
    scenes = [{"scene_id": "s1", "lon_deg": 15.0, "lat_deg": 5.0},
              {"scene_id": "s2", "lon_deg": 15.5, "lat_deg": 5.5},
              {"scene_id": "s3", "lon_deg": 200.0, "lat_deg": -45.0}]
    boxes = [{"scene_id": "s1", "bbox": [10, 10, 20, 20]},
             {"scene_id": "s2", "bbox": [50, 50, 30, 30], "diameter_km": 3.0},
             {"scene_id": "s3", "bbox": [100, 100, 8, 8]}]
    dets = [{"scene_id": "s1", "bbox": [10, 10, 20, 20], "score": 0.9},
            {"scene_id": "s2", "bbox": [0, 0, 10, 10], "score": 0.8}]
    return {
        "manifest": write_json(tmp_path / "manifest.json", {"format_version": 1, "scenes": scenes}),
        "gt": write_json(tmp_path / "gt.json", {"format_version": 1, "boxes": boxes}),
        "pred": write_json(tmp_path / "pred.json", {"format_version": 1, "detections": dets}),
        "empty": write_json(tmp_path / "empty.json", {"format_version": 1, "detections": []}),
    }


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion and print it."""
    def record(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
