"""Command line: ``repdel run``, ``repdel verify`` and ``repdel fixtures``.

A run spec is one JSON object::

    {
      "name": "dbs_p1",
      "instance": {"fixture": "P1(0.1, 1e-14)"},
      "mechanism": {"name": "delayed_binary_search", "params": {"y_min": 1e-14}, "delay": 0},
      "agent": {"name": "adversarial", "params": {"eps": 0.01}},
      "T": [10000],
      "seeds": [0, 1, 2]
    }

Optional keys: gamma (0.9), knows_mechanism (true), output_dir,
write_traces (true) and benchmark {grid_size, n_samples, seed, estimator}.
``instance`` is one of {"fixture": name, "args": [...]},
{"generator": "chain" | "random", "params": {...}, "seed": s},
{"file": path} or {"inline": <instance JSON>}.  ``seeds`` may also be an
integer n, meaning seeds 0..n-1.  Unknown keys are rejected.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import AGENTS
from .core import InvalidParameter
from .engine import AgentSpec, BenchmarkSpec, MechanismSpec, SimulationConfig, get_benchmark, run_simulation, write_trace_csv
from .instances import (
    FIXTURES,
    InstanceModel,
    fixture,
    generate_deterministic_chain,
    random_deterministic,
)
from .mechanisms import mechanism_names

EXIT_OK, EXIT_RUNTIME, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3
OUT_ENV = "REPDEL_OUT"
DEFAULT_OUT = "runs"

SPEC_KEYS = {"name", "instance", "mechanism", "agent", "T", "seeds", "gamma", "knows_mechanism",
             "output_dir", "write_traces", "benchmark"}
REQUIRED = ("name", "instance", "mechanism", "T")


class SpecError(Exception):
    """Validation failure; the message starts with the offending key."""


@dataclass
class ExperimentSpec:
    name: str
    instance: InstanceModel
    mechanism: MechanismSpec
    agent: AgentSpec
    Ts: list
    seeds: list
    gamma: float
    knows_mechanism: bool
    output_dir: str
    write_traces: bool
    benchmark: BenchmarkSpec
    raw: dict

    def config(self, T: int) -> SimulationConfig:
        return SimulationConfig(self.instance, self.mechanism, self.agent, T, 0, self.gamma,
                                self.knows_mechanism, self.benchmark)


def _reject_unknown(doc: dict, allowed, where: str):
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise SpecError(f"{where}{extra[0]}: unknown key (allowed: {sorted(allowed)})")


def _as_dict(v, where):
    if not isinstance(v, dict):
        raise SpecError(f"{where}: expected an object")
    return v


def resolve_instance(ref, base_dir: str = ".") -> InstanceModel:
    if isinstance(ref, str):
        ref = {"fixture": ref}
    ref = _as_dict(ref, "instance")
    forms = [k for k in ("fixture", "generator", "file", "inline") if k in ref]
    if len(forms) != 1:
        raise SpecError("instance: give exactly one of fixture, generator, file, inline")
    form = forms[0]
    try:
        if form == "fixture":
            _reject_unknown(ref, {"fixture", "args"}, "instance.")
            return fixture(ref["fixture"], *ref.get("args", []))
        if form == "generator":
            _reject_unknown(ref, {"generator", "params", "seed"}, "instance.")
            p = dict(ref.get("params", {}))
            gen = ref["generator"]
            if gen == "chain":
                return generate_deterministic_chain(seed=ref.get("seed", 0), **p)
            if gen == "random":
                return random_deterministic(rng=np.random.default_rng(ref.get("seed", 0)), **p)
            raise SpecError(f"instance.generator: unknown generator {gen!r} (known: chain, random)")
        if form == "file":
            _reject_unknown(ref, {"file"}, "instance.")
            path = Path(base_dir, ref["file"])
            return InstanceModel.from_dict(json.loads(path.read_text()))
        _reject_unknown(ref, {"inline"}, "instance.")
        return InstanceModel.from_dict(_as_dict(ref["inline"], "instance.inline"))
    except SpecError:
        raise
    except (InvalidParameter, TypeError, ValueError, KeyError, OSError) as e:
        raise SpecError(f"instance.{form}: {e}") from None


def validate_spec(doc, base_dir: str = ".", out: str | None = None, seed_override=None) -> ExperimentSpec:
    """Resolve every name and build every cell's mechanism and agent once, before anything runs."""
    doc = _as_dict(doc, "spec")
    _reject_unknown(doc, SPEC_KEYS, "")
    for k in REQUIRED:
        if k not in doc:
            raise SpecError(f"{k}: required key missing")
    name = doc["name"]
    if not isinstance(name, str) or not name or "/" in name:
        raise SpecError("name: must be a non-empty string without '/'")
    inst = resolve_instance(doc["instance"], base_dir)

    m = _as_dict(doc["mechanism"], "mechanism")
    _reject_unknown(m, {"name", "params", "delay"}, "mechanism.")
    if m.get("name") not in mechanism_names():
        raise SpecError(f"mechanism.name: unknown mechanism {m.get('name')!r} (known: {mechanism_names()})")
    delay = m.get("delay", 0)
    if not isinstance(delay, int) or delay < 0:
        raise SpecError("mechanism.delay: must be a non-negative integer")
    mspec = MechanismSpec(m["name"], dict(m.get("params", {})), delay)

    a = _as_dict(doc.get("agent", {"name": "myopic"}), "agent")
    _reject_unknown(a, {"name", "params"}, "agent.")
    if a.get("name", "myopic") not in AGENTS:
        raise SpecError(f"agent.name: unknown agent {a.get('name')!r} (known: {sorted(AGENTS)})")
    aspec = AgentSpec(a.get("name", "myopic"), dict(a.get("params", {})))

    Ts = doc["T"] if isinstance(doc["T"], list) else [doc["T"]]
    if not Ts or not all(isinstance(T, int) and not isinstance(T, bool) and T >= 1 for T in Ts):
        raise SpecError("T: must be a positive integer or a non-empty list of them")
    seeds = doc.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = list(range(seeds))
    if seed_override is not None:
        seeds = list(seed_override)
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise SpecError("seeds: must be a non-empty list of non-negative integers or a count")

    gamma = doc.get("gamma", 0.9)
    if not isinstance(gamma, (int, float)) or not 0 < gamma < 1:
        raise SpecError("gamma: must lie in (0, 1)")
    b = _as_dict(doc.get("benchmark", {}), "benchmark")
    _reject_unknown(b, {"grid_size", "n_samples", "seed", "estimator"}, "benchmark.")
    bspec = BenchmarkSpec(**b)

    out_dir = out or doc.get("output_dir") or os.environ.get(OUT_ENV) or DEFAULT_OUT
    spec = ExperimentSpec(name, inst, mspec, aspec, Ts, seeds, float(gamma), bool(doc.get("knows_mechanism", True)),
                          out_dir, bool(doc.get("write_traces", True)), bspec, doc)
    for T in Ts:
        cfg = spec.config(T)
        try:
            cfg.build_mechanism()
        except (InvalidParameter, TypeError, ValueError) as e:
            raise SpecError(f"mechanism.params: {e}") from None
        try:
            cfg.build_agent()
        except (InvalidParameter, TypeError, ValueError) as e:
            raise SpecError(f"agent.params: {e}") from None
    return spec


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(args):
    config, bench, trace_path = args
    t0 = time.perf_counter()
    res = run_simulation(config, bench)
    if trace_path is not None:
        write_trace_csv(res, trace_path)
    return res.regret, time.perf_counter() - t0


def execute(spec: ExperimentSpec, jobs: int = 1) -> Path:
    root = Path(spec.output_dir, spec.name)
    traces = root / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    cells = []
    for T in spec.Ts:
        cfg = spec.config(T)
        bench = get_benchmark(cfg)
        for s in spec.seeds:
            path = traces / f"T{T}_seed{s}.csv" if spec.write_traces else None
            cells.append((cfg.with_seed(s), bench, path))
    t0 = time.perf_counter()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]
    wall = time.perf_counter() - t0

    n = len(spec.seeds)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "n_seeds", "mean_regret", "stddev"])
    dat = ["# T mean_regret"]
    timing = {"wall_seconds": wall, "cells": []}
    for i, T in enumerate(spec.Ts):
        block = results[i * n:(i + 1) * n]
        regrets = np.array([r for r, _ in block])
        mean = float(regrets.mean())
        std = float(regrets.std(ddof=1)) if n > 1 else 0.0
        w.writerow([T, n, repr(mean), repr(std)])
        dat.append(f"{T} {mean!r}")
        timing["cells"].append({"T": T, "runtime_seconds": sum(dt for _, dt in block)})
    _atomic_write(root / "summary.csv", buf.getvalue())
    _atomic_write(root / "regret_vs_T.dat", "\n".join(dat) + "\n")
    _atomic_write(root / "timing.json", json.dumps(timing, indent=2) + "\n")
    resolved = dict(spec.raw)
    resolved.update({"T": spec.Ts, "seeds": spec.seeds, "gamma": spec.gamma,
                     "instance": {"inline": spec.instance.to_dict()},
                     "benchmark": dataclasses.asdict(spec.benchmark)})
    resolved.pop("output_dir", None)
    _atomic_write(root / "spec.json", json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    bench = get_benchmark(spec.config(spec.Ts[0])).to_dict()
    _atomic_write(root / "benchmark.json", json.dumps(bench, indent=2, sort_keys=True) + "\n")
    return root


def run_spec(doc: dict, out: str | None = None, jobs: int = 1, seed_override=None, base_dir: str = ".") -> Path:
    """Validate and run a spec given as a dict; returns the output directory."""
    return execute(validate_spec(doc, base_dir, out, seed_override), jobs)


def cmd_run(args) -> int:
    try:
        text = Path(args.spec).read_text()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: cannot parse spec {args.spec}: {e}", file=sys.stderr)
        return EXIT_PARSE
    try:
        seeds = None
        if args.seed_override is not None:
            seeds = [int(s) for s in args.seed_override.split(",")]
        spec = validate_spec(doc, str(Path(args.spec).parent), args.out, seeds)
    except (SpecError, ValueError) as e:
        print(f"error: invalid spec: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        root = execute(spec, args.jobs)
    except Exception as e:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"error: run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(root / "summary.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import SUITES, run_criterion

    if args.criteria:
        numbers = [int(c) for c in args.criteria.split(",")]
    else:
        numbers = SUITES[args.suite]
    failed = 0
    for n in numbers:
        res = run_criterion(n)
        print(res.line(), flush=True)
        failed += not res.passed
    print(f"{len(numbers) - failed}/{len(numbers)} criteria passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def _show(inst: InstanceModel) -> str:
    lines = [f"name: {inst.name}", f"kind: {inst.kind}"]
    meta = {k: v for k, v in inst.metadata.items() if v is not None}
    if meta:
        lines.append("metadata: " + json.dumps(meta, sort_keys=True))
    if inst.is_deterministic:
        lines.append("solutions (x, y):")
        lines += [f"  {x!r}, {y!r}" for x, y in zip(inst.xs.tolist(), inst.ys.tolist())]
    else:
        lines.append(f"sampler: {inst.sampler} {json.dumps(inst.params, sort_keys=True)}")
    if inst.has_curve:
        ts, fs = inst.curve_argmax()
        lines.append(f"tau* = {ts:.5f} (derived, closed-form curve)")
        lines.append(f"f(tau*) = {fs:.5f} (derived, closed-form curve)")
        for tau in np.linspace(0, 1, 11):
            lines.append(f"  f({tau:.1f}) = {float(inst.curve(tau)):.5f}")
    return "\n".join(lines)


def cmd_fixtures(args) -> int:
    if args.action == "list":
        for name, factory in FIXTURES.items():
            inst = factory()
            print(f"{name:32s} {inst.kind:13s} K={inst.K}")
        return EXIT_OK
    if not args.name:
        print("error: fixture name required", file=sys.stderr)
        return EXIT_PARSE
    try:
        inst = fixture(args.name)
    except (InvalidParameter, TypeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.action == "show":
        print(_show(inst))
        return EXIT_OK
    if not args.path:
        print("error: export needs a destination path", file=sys.stderr)
        return EXIT_PARSE
    Path(args.path).write_text(inst.to_json() + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="repdel", description="Repeated delegated-choice simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a JSON experiment spec")
    r.add_argument("--spec", required=True, help="path to the JSON spec")
    r.add_argument("--out", default=None, help=f"output root (default: spec output_dir, ${OUT_ENV}, or ./{DEFAULT_OUT})")
    r.add_argument("--jobs", type=int, default=1, help="parallel (T, seed) cells (default 1)")
    r.add_argument("--seed-override", default=None, help="comma-separated seeds replacing the spec's list")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--suite", choices=("fast", "full"), default="fast", help="criteria set (default fast)")
    v.add_argument("--criteria", default=None, help="comma-separated criterion numbers instead of a suite")
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fixtures", help="list, show or export fixtures")
    f.add_argument("action", choices=("list", "show", "export"))
    f.add_argument("name", nargs="?", help='fixture name, e.g. P2 or "P1(0.1, 1e-14)"')
    f.add_argument("path", nargs="?", help="destination for export")
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
