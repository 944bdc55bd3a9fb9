"""Scenario-driven command line front end.

Subcommands
-----------
run             execute a scenario and write its artifact bundle
validate        schema-check a configuration without executing
list-scenarios  table of bundled scenario ids

``run`` exits 0 only when every enabled acceptance check passes, 1 on a
runtime failure (the failing stage is named) or failed checks, and 2 on a
validation failure.  Artifacts are deterministic for fixed seeds; the run
timestamp is quarantined to the manifest.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
import traceback
from importlib import resources
from pathlib import Path

from paulilab import runtime
from paulilab.config import (ConfigError, Scenario, load_document,
                             load_scenario, validate_document)


def bundled_scenarios() -> dict:
    """Mapping scenario id -> one-line description, sorted by id."""
    out = {}
    root = resources.files("paulilab") / "scenarios"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            doc = json.loads(entry.read_text(encoding="utf-8"))
            out[doc["scenario"]] = doc.get("description", "").split(". ")[0]
    return out


def resolve_config(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    candidate = resources.files("paulilab") / "scenarios" / f"{name_or_path}.json"
    with resources.as_file(candidate) as real:
        if real.exists():
            return real
    raise FileNotFoundError(f"no such config file or bundled scenario: "
                            f"{name_or_path}")


def cmd_validate(args) -> int:
    try:
        doc = load_document(resolve_config(args.config))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"invalid: not valid JSON ({exc})", file=sys.stderr)
        return 2
    problems = validate_document(doc)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return 2
    print(f"ok: scenario {doc['scenario']!r} is valid")
    return 0


def cmd_list(_args) -> int:
    table = bundled_scenarios()
    width = max(len(k) for k in table)
    for name, desc in table.items():
        print(f"{name:<{width}}  {desc}")
    return 0


def run_scenario(scenario: Scenario, outdir: Path, strict: bool = False) -> int:
    from paulilab.stages import Manifest, STAGE_ORDER

    outdir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(outdir=outdir)
    diagnostics = scenario.doc["diagnostics"]
    results = []
    for name, func in STAGE_ORDER:
        spec = diagnostics.get(name)
        if not spec or not spec.get("enabled"):
            continue
        print(f"[{scenario.name}] running stage {name} ...", flush=True)
        try:
            result = func(scenario, spec, outdir, manifest)
        except Exception as exc:
            print(f"error: stage {name!r} failed: {exc}", file=sys.stderr)
            if strict:
                traceback.print_exc()
            return 1
        results.append(result)
        print(f"[{scenario.name}] {name}: "
              f"{'pass' if result.passed else 'FAIL'} ({result.summary})",
              flush=True)

    digest = hashlib.sha256(
        json.dumps(scenario.doc, sort_keys=True).encode()).hexdigest()
    manifest_payload = {
        "schema_version": 1,
        "scenario": scenario.name,
        "config_digest": digest,
        "generated_at": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
        "checks": {r.name: bool(r.passed) for r in results},
        "files": manifest.entries,
    }
    manifest_path = outdir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest_payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    listed = {e["name"] for e in manifest.entries} | {"manifest.json"}
    on_disk = {p.name for p in outdir.iterdir() if p.is_file()}
    if not on_disk <= listed:
        print(f"error: unlisted artifacts {sorted(on_disk - listed)}",
              file=sys.stderr)
        return 1

    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"checks failed: {failed}", file=sys.stderr)
        return 1
    print(f"[{scenario.name}] all {len(results)} enabled checks passed; "
          f"artifacts in {outdir}")
    return 0


def cmd_run(args) -> int:
    try:
        path = resolve_config(args.config)
        doc = load_document(path)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"invalid: not valid JSON ({exc})", file=sys.stderr)
        return 2
    problems = validate_document(doc)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return 2
    try:
        scenario = load_scenario(path)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out) if args.out else Path("runs") / scenario.name
    return run_scenario(scenario, outdir, strict=args.strict)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paulilab",
        description="numerical laboratory for spin-1/2 Pauli Hamiltonians")
    parser.add_argument("--threads", type=int, default=None, metavar="N",
                        help="cap internal worker count "
                             "(PAULILAB_THREADS mirrors this)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("--config", required=True,
                       help="path to a scenario JSON or a bundled id")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--strict", action="store_true",
                       help="escalate resolution warnings and print "
                            "tracebacks")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="schema-check a configuration")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_list = sub.add_parser("list-scenarios", help="bundled scenario ids")
    p_list.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        runtime.set_max_workers(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
