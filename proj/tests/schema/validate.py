"""Validates scenarios and session frames against the published JSON schemas."""
import argparse
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource


def load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--schemas", required=True, type=pathlib.Path)
    ap.add_argument("--scenarios", required=True, type=pathlib.Path)
    ap.add_argument("--work", required=True, type=pathlib.Path)
    args = ap.parse_args()

    scenario_schema = load(args.schemas / "scenario.schema.json")
    frames_schema = load(args.schemas / "frames.schema.json")
    registry = Registry().with_resources(
        (s["$id"], Resource.from_contents(s)) for s in (scenario_schema, frames_schema)
    )
    cls = jsonschema.validators.validator_for(scenario_schema)
    cls.check_schema(scenario_schema)
    cls.check_schema(frames_schema)
    scenario_v = cls(scenario_schema, registry=registry)
    frames_v = cls(frames_schema, registry=registry)

    failures = 0
    checked = 0

    def check(validator, doc, label):
        nonlocal failures, checked
        checked += 1
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        for e in errors[:3]:
            print(f"FAIL {label}: {'/'.join(map(str, e.path))}: {e.message}")
        failures += bool(errors)

    for p in sorted(args.scenarios.glob("*.json")):
        check(scenario_v, load(p), f"scenario {p.name}")
    for p in sorted((args.work / "effective").glob("*.json")):
        check(scenario_v, load(p), f"effective {p.name}")
    for p in sorted((args.work / "frames").glob("*.json")):
        for i, frame in enumerate(load(p)):
            check(frames_v, frame, f"frame {p.stem}[{i}] {frame.get('type')}")
    for i, frame in enumerate(load(args.work / "client_frames.json")):
        check(frames_v, frame, f"client frame {i} {frame.get('type')}")

    # A few frames that must be rejected.
    for bad in ({"type": "crash", "id": 1}, {"type": "warp", "id": 1}, {"type": "ack"}):
        checked += 1
        if frames_v.is_valid(bad):
            print(f"FAIL accepted invalid frame {bad}")
            failures += 1

    print(f"{checked - failures}/{checked} documents valid")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
