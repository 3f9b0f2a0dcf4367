"""Command-line front end: channel specs in, JSON or CSV reports out.

Exit codes: 0 success, 1 input error, 2 infinite divergence, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .bounds import BoundRequest, EnergyConstraint, EnergyInfeasible, sandwich
from .channels import (ChannelError, amplitude_damping, channel_to_json, decode_matrix,
                       dephasing, depolarizing, identity, load_channel, replacer)
from .grid import SCHEMES
from .oracle import brute_force_channel_re
from .resource import FreeSetError, FreeSetSpec, free_divergence
from .sdp import SolverError
from .spectral import dmax, dmax_sdp, interval_for_pair

SCHEMA = "choi-divergence/1"
EXIT_OK, EXIT_INPUT, EXIT_INFINITE, EXIT_SOLVER = 0, 1, 2, 3
NAT_PER_BIT = math.log(2.0)
ENTROPY_FIELDS = ("lower", "upper", "gap", "value", "midpoint", "dmax", "dmax_sdp")

# name, factory, expected value against the identity channel, provenance
EXAMPLES = [
    ("identity", lambda: identity(2), 0.0, "TRIVIAL: identical channels"),
    ("depolarizing_0.25", lambda: depolarizing(0.25), 0.2076393, "DERIVED: brute-force oracle"),
    ("depolarizing_0.5", lambda: depolarizing(0.5), 0.4700036, "DERIVED: brute-force oracle"),
    ("depolarizing_0.75", lambda: depolarizing(0.75), 0.8266786, "DERIVED: brute-force oracle"),
    ("dephasing_0.3", lambda: dephasing(0.3), None, ""),
    ("dephasing_0.6", lambda: dephasing(0.6), None, ""),
    ("amplitude_damping_0.5", lambda: amplitude_damping(0.5), math.inf,
     "DERIVED: support analysis"),
    ("replacer_mixed", lambda: replacer(np.eye(2) / 2), 2 * math.log(2),
     "DERIVED: analytic 2 ln 2"),
]
EXTRA_PAIRS = [("dephasing_0.3", "dephasing_0.6", 0.0610605, "DERIVED: brute-force oracle")]


class InputError(ValueError):
    """Bad command-line input; reported with exit code 1."""


def _num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _matrix(M):
    return None if M is None else [[[float(z.real), float(z.imag)] for z in row]
                                   for row in np.asarray(M, dtype=complex)]


def _load(path: str):
    if path is None:
        raise InputError("missing channel path")
    if not Path(path).exists():
        raise InputError(f"{path}: no such file")
    return load_channel(path)


def _read_json(path: str, what: str):
    p = Path(path)
    if not p.exists():
        raise InputError(f"{what} {path}: no such file")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _energy(args) -> list:
    if args.energy is None:
        if args.E is not None:
            raise InputError("--E needs --energy")
        return []
    if args.E is None:
        raise InputError("--energy needs --E")
    data = _read_json(args.energy, "Hamiltonian")
    H = decode_matrix(data["H"] if isinstance(data, dict) else data, "H")
    return [EnergyConstraint(H, args.E)]


def _solver_opts(args) -> dict:
    return {"tol_gap": args.tol_gap, "tol_feas": args.tol_feas}


def _free_spec(args, gN) -> FreeSetSpec:
    text = args.free
    if text is None:
        raise InputError("resource needs --free")
    if text in ("replacer", "ppt"):
        spec = {"kind": text}
    elif text.startswith("fixed:"):
        spec = {"kind": "fixed", "choi": _read_json(text[6:], "free channel")}
    elif text.startswith("custom:"):
        spec = _read_json(text[7:], "free set")
        spec.setdefault("kind", "custom")
    elif text.endswith(".json"):
        spec = _read_json(text, "free set")
    else:
        spec = {"kind": text}
    if args.lambda_bar is not None:
        spec["lambda_bar"] = args.lambda_bar
    return FreeSetSpec.from_json(spec, (gN.dimA, gN.dimB))


def cmd_bounds(args) -> tuple[int, dict]:
    gN, gM = _load(args.n), _load(args.m)
    t = time.perf_counter()
    interval = interval_for_pair(gN, gM)
    t_interval = time.perf_counter() - t
    req = BoundRequest(gN, gM, eps=args.epsilon, r_init=args.r, scheme=args.grid,
                       energy=_energy(args), solver_opts=_solver_opts(args))
    t = time.perf_counter()
    res = sandwich(req, interval)
    report = {"lower": res.lower, "upper": res.upper, "gap": res.gap, "lambda": res.lam,
              "mu": res.mu, "r_used": res.r_used, "status": res.status,
              "witness": _matrix(res.witness_rhoA),
              "timings": {"interval": t_interval, "sandwich": time.perf_counter() - t,
                          "per_r": res.diagnostics}}
    return (EXIT_INFINITE if res.infinite else EXIT_OK), report


def cmd_dmax(args) -> tuple[int, dict]:
    gN, gM = _load(args.n), _load(args.m)
    t = time.perf_counter()
    spectral = dmax(gN.op, gM.op)
    t1 = time.perf_counter()
    via_sdp = dmax_sdp(gN.op, gM.op, **_solver_opts(args))
    t2 = time.perf_counter()
    report = {"dmax": spectral, "dmax_sdp": via_sdp, "lambda": math.exp(spectral),
              "timings": {"spectral": t1 - t, "sdp": t2 - t1}}
    return (EXIT_INFINITE if math.isinf(spectral) else EXIT_OK), report


def cmd_resource(args) -> tuple[int, dict]:
    gN = _load(args.n)
    F = _free_spec(args, gN)
    t = time.perf_counter()
    res = free_divergence(gN, F, eps=args.epsilon, r_init=args.r, scheme=args.grid,
                          energy=_energy(args) or None, solver_opts=_solver_opts(args))
    report = {"upper": res.upper, "lower": res.matching_lower, "gap": res.gap,
              "lambda_bar": res.lambda_bar, "r_used": res.r_used, "free": F.kind,
              "optimizer_choi": _matrix(res.optimizer_choi.op),
              "timings": {"solve": time.perf_counter() - t, "per_r": res.diagnostics}}
    return EXIT_OK, report


def cmd_oracle(args) -> tuple[int, dict]:
    gN, gM = _load(args.n), _load(args.m)
    if math.isinf(dmax(gN.op, gM.op)):
        return EXIT_INFINITE, {"value": math.inf, "lambda": math.inf, "witness": None}
    t = time.perf_counter()
    rep = brute_force_channel_re(gN, gM, seed=args.seed)
    return EXIT_OK, {"value": rep.value, "converged": rep.converged, "method": rep.method,
                     "iterations": rep.iterations, "witness": _matrix(rep.witness),
                     "timings": {"oracle": time.perf_counter() - t}}


def emit_examples(directory) -> list[Path]:
    """Write JSON specs for the builtin channels and a README table of expected values."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, factory, _, _ in EXAMPLES:
        p = out / f"{name}.json"
        p.write_text(json.dumps(channel_to_json(factory()), indent=1) + "\n")
        written.append(p)
    lines = ["# Example channel specs", "",
             "Expected `bounds --n identity.json --m <spec>` values in nats.", "",
             "| N | M | expected D(N‖M) | provenance |", "|---|---|---|---|"]
    for name, _, value, tag in EXAMPLES:
        if value is not None:
            lines.append(f"| identity | {name} | {_fmt(value)} | {tag} |")
    for a, b, value, tag in EXTRA_PAIRS:
        lines.append(f"| {a} | {b} | {_fmt(value)} | {tag} |")
    p = out / "README.md"
    p.write_text("\n".join(lines) + "\n")
    written.append(p)
    return written


def _fmt(v: float) -> str:
    return "+inf" if math.isinf(v) else f"{v:.7f}"


def cmd_examples(args) -> tuple[int, dict]:
    files = emit_examples(args.dir)
    return EXIT_OK, {"files": [p.name for p in files], "dir": str(args.dir)}


COMMANDS = {"bounds": cmd_bounds, "dmax": cmd_dmax, "resource": cmd_resource,
            "oracle": cmd_oracle, "examples": cmd_examples}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="choidiv",
                                 description="Certified bounds on the relative entropy of channels.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "examples":
            p.add_argument("dir", nargs="?", default="examples_out")
        else:
            p.add_argument("--n", required=True, help="first channel spec (JSON)")
            if name != "resource":
                p.add_argument("--m", required=True, help="second channel spec (JSON)")
        p.add_argument("--epsilon", type=float, default=1e-2)
        p.add_argument("--r", type=int, default=None, help="initial grid size")
        p.add_argument("--grid", choices=SCHEMES, default="geometric")
        p.add_argument("--energy", default=None, help="Hamiltonian JSON path")
        p.add_argument("--E", type=float, default=None, help="energy bound")
        p.add_argument("--free", default=None,
                       help="replacer | ppt | fixed:<path> | custom:<path>")
        p.add_argument("--lambda-bar", dest="lambda_bar", type=float, default=None)
        p.add_argument("--tol-gap", dest="tol_gap", type=float, default=1e-8)
        p.add_argument("--tol-feas", dest="tol_feas", type=float, default=1e-8)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--no-meta", dest="no_meta", action="store_true",
                       help="omit timings so reports are reproducible byte for byte")
        p.add_argument("--bits", action="store_true", help="report entropies in bits")
    return ap


def _finish(report: dict, args, command: str) -> dict:
    out = {"schema": SCHEMA, "command": command, "units": "bits" if args.bits else "nats"}
    for k, v in report.items():
        if args.bits and k in ENTROPY_FIELDS and isinstance(v, float):
            v = v / NAT_PER_BIT
        out[k] = v
    if args.no_meta:
        out.pop("timings", None)
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    return _num(x)


def render(report: dict, fmt: str) -> str:
    data = _jsonable(report)
    if fmt == "json":
        return json.dumps(data, indent=1, sort_keys=True) + "\n"
    scalars = {k: v for k, v in data.items() if not isinstance(v, (dict, list)) and v is not None}
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(scalars), lineterminator="\n")
    w.writeheader()
    w.writerow(scalars)
    return buf.getvalue()


def parse_report(text: str) -> dict:
    """Parse a JSON report, restoring infinite values; rejects other schemas."""
    data = json.loads(text)
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unknown report schema {data.get('schema')!r}")
    for k, v in data.items():
        if v in ("inf", "-inf", "nan"):
            data[k] = float(v)
    return data


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if not args.epsilon > 0:
        print("error: --epsilon must be positive", file=stderr)
        return EXIT_INPUT
    try:
        code, report = COMMANDS[args.command](args)
    except (InputError, ChannelError, FreeSetError, EnergyInfeasible, KeyError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=stderr)
        return EXIT_SOLVER
    stdout.write(render(_finish(report, args, args.command), args.format))
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
