#!/usr/bin/env python3
"""Runs each CLI command once and validates its JSON output against docs/schemas."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

ROOT = pathlib.Path(__file__).resolve().parent.parent
SCHEMAS = ROOT / "docs" / "schemas"


def load_schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def run(cli, *args, ok=(0,)):
    proc = subprocess.run([cli, *args], capture_output=True, text=True)
    if proc.returncode not in ok:
        sys.exit(f"{' '.join(args)} exited {proc.returncode}: {proc.stderr}")
    return json.loads(proc.stdout)


def main():
    cli = sys.argv[1]
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        planted, points = str(tmp / "planted.json"), str(tmp / "points.json")
        run_plain = lambda *a: subprocess.run([cli, *a], check=True, capture_output=True)
        run_plain("--out", planted, "gen", "planted", "--m", "5", "--n", "5", "--r", "2",
                  "--rho", "3", "--seed", "4")
        run_plain("--out", points, "gen", "points", "--m", "6", "--n", "5", "--d", "2")
        scenario = tmp / "scenario.json"
        scenario.write_text(json.dumps({
            "name": "schema", "repetitions": 5, "steps": 3,
            "grids": [{"n": [8, 12], "r": [2]},
                      {"n": [5], "r": [2], "timing": False, "solve": True,
                       "instance": "random", "alm": {"T_max": 2, "S_max": 5}}]}))

        cases = [
            ("instance", json.loads(pathlib.Path(planted).read_text())),
            ("instance", json.loads(pathlib.Path(points).read_text())),
            ("solve", run(cli, "solve", "exact", points)),
            ("solve", run(cli, "solve", "sinkhorn", points)),
            ("solve", run(cli, "solve", "lsot", points, "--T-max", "2", "--S-max", "20",
                          "--rho", "2", ok=(0, 2))),
            ("solve", run(cli, "solve", "lot", points, "--T-max", "2", "--S-max", "20",
                          ok=(0, 2))),
            ("bound", run(cli, "bound", planted, "--r", "1", "--rho", "1")),
            ("bound", run(cli, "bound", planted, "--sweep", "--solve", "--T-max", "2",
                          "--S-max", "20")),
            ("verify", run(cli, "verify", "oracle")),
            ("bench", run(cli, "--format", "json", "bench", str(scenario))),
            ("scenario", json.loads(scenario.read_text())),
            ("scenario", json.loads((ROOT / "docs" / "scenarios" / "scaling.json").read_text())),
        ]
        for name, doc in cases:
            try:
                jsonschema.validate(doc, load_schema(name))
                print(f"ok   {name}")
            except jsonschema.ValidationError as e:
                failures += 1
                print(f"FAIL {name}: {e.message}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
