"""Command-line front end: config parsing, trace serialisation, subcommands.

Usage::

    btbeam simulate --config run.json [--out DIR] [--format csv|json|both] [--allow-low-q]
    btbeam envelope --config run.json
    btbeam fit      --config run.json [--trace trace.csv]
    btbeam verify   --config run.json
    btbeam sweep    --config run.json

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis
from .core import (
    EnergyBreakdown,
    EnergyTrace,
    InitialCondition,
    ModelParams,
    TraceSample,
    make_initial,
    validate_params,
)
from .envelope import (
    EnvelopeConstants,
    envelope_constants,
    lower_envelope,
    upper_envelope,
    verify_nakao_hypothesis,
)
from .errors import BadMode, BeamError, ConfigError, FileMismatch, ParseError, UnknownKey, ValidationError, ZeroDamping
from .integrate import sample_steps, simulate
from .operators import assemble_operators, continuum_min_eigenvalue

log = logging.getLogger("btbeam")

CSV_COLUMNS = ("t", "E", "bilap_sq", "vel_sq", "grad_sq", "coeff", "dissipation", "lower_env", "upper_env")
FORMATS = ("csv", "json")

_FLOAT_KEYS = ("kappa", "alpha", "q", "length", "dt", "t_end")
_INT_KEYS = ("n", "sample_every", "seed")
_STR_KEYS = ("variant", "scheme", "envelope_variant", "output_dir")
_BOOL_KEYS = ("allow_low_q",)
_OTHER_KEYS = ("initial", "samples_per_decade", "formats", "sweep")
CONFIG_KEYS = frozenset(_FLOAT_KEYS + _INT_KEYS + _STR_KEYS + _BOOL_KEYS + _OTHER_KEYS)
INITIAL_KEYS = frozenset(("kind", "k", "amp", "path"))
SWEEP_KEYS = frozenset(("q", "alpha", "kappa"))


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    initial: InitialCondition = field(default_factory=InitialCondition)
    envelope_variant: str = "theorem"
    output_dir: str = "out"
    formats: tuple[str, ...] = ("csv",)
    sweep: dict | None = None


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_type(key: str, value, kind) -> None:
    ok = {
        float: _is_number(value),
        int: isinstance(value, int) and not isinstance(value, bool),
        str: isinstance(value, str),
        bool: isinstance(value, bool),
    }[kind]
    if not ok:
        raise ParseError(f"expected {kind.__name__}, got {type(value).__name__}", key=key)


def config_from_dict(raw: dict, allow_low_q: bool = False) -> RunConfig:
    if not isinstance(raw, dict):
        raise ParseError("top level must be a JSON object")
    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        raise UnknownKey(f"unknown key(s): {', '.join(unknown)}", key=unknown[0])

    model_kwargs = {}
    for keys, kind in ((_FLOAT_KEYS, float), (_INT_KEYS, int), (_BOOL_KEYS, bool)):
        for k in keys:
            if k in raw:
                _check_type(k, raw[k], kind)
                model_kwargs[k] = float(raw[k]) if kind is float else raw[k]
    for k in ("variant", "scheme"):
        if k in raw:
            _check_type(k, raw[k], str)
            model_kwargs[k] = raw[k]
    if "samples_per_decade" in raw and raw["samples_per_decade"] is not None:
        _check_type("samples_per_decade", raw["samples_per_decade"], int)
        model_kwargs["samples_per_decade"] = raw["samples_per_decade"]
    if allow_low_q:
        model_kwargs["allow_low_q"] = True
    model = validate_params(ModelParams(**model_kwargs))

    initial = InitialCondition()
    if "initial" in raw:
        ini = raw["initial"]
        if not isinstance(ini, dict):
            raise ParseError("expected an object", key="initial")
        unknown = sorted(set(ini) - INITIAL_KEYS)
        if unknown:
            raise UnknownKey(f"unknown key(s) in initial: {', '.join(unknown)}", key=f"initial.{unknown[0]}")
        kind = ini.get("kind", "sin_sq_mode")
        if kind not in ("sin_sq_mode", "eigenmode", "from_file"):
            raise ParseError(f"unknown initial kind {kind!r}", key="initial.kind")
        if "k" in ini:
            _check_type("initial.k", ini["k"], int)
        if "amp" in ini:
            _check_type("initial.amp", ini["amp"], float)
        if kind == "from_file" and not isinstance(ini.get("path"), str):
            raise ParseError("from_file needs a string path", key="initial.path")
        initial = InitialCondition(kind=kind, k=ini.get("k", 1), amp=float(ini.get("amp", InitialCondition.amp)), path=ini.get("path"))

    env_variant = raw.get("envelope_variant", "theorem")
    _check_type("envelope_variant", env_variant, str)
    if env_variant not in ("theorem", "remark"):
        raise ParseError(f"must be 'theorem' or 'remark', got {env_variant!r}", key="envelope_variant")

    output_dir = raw.get("output_dir", "out")
    _check_type("output_dir", output_dir, str)

    formats = raw.get("formats", ["csv"])
    if isinstance(formats, str):
        formats = [formats]
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        raise ParseError(f"must be a non-empty subset of {FORMATS}", key="formats")

    sweep = None
    if raw.get("sweep") is not None:
        sw = raw["sweep"]
        if not isinstance(sw, dict):
            raise ParseError("expected an object", key="sweep")
        unknown = sorted(set(sw) - SWEEP_KEYS)
        if unknown:
            raise UnknownKey(f"unknown key(s) in sweep: {', '.join(unknown)}", key=f"sweep.{unknown[0]}")
        sweep = {}
        for k, vals in sw.items():
            if not isinstance(vals, list) or not vals or not all(_is_number(v) for v in vals):
                raise ParseError("expected a non-empty list of numbers", key=f"sweep.{k}")
            sweep[k] = [float(v) for v in vals]
            for v in sweep[k]:
                validate_params(model.replace(**{k: v}))

    return RunConfig(
        model=model,
        initial=initial,
        envelope_variant=env_variant,
        output_dir=output_dir,
        formats=tuple(dict.fromkeys(formats)),
        sweep=sweep,
    )


def parse_config(path: str | os.PathLike, allow_low_q: bool = False) -> RunConfig:
    """Read and validate a JSON run configuration. Unknown keys are errors."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return config_from_dict(raw, allow_low_q=allow_low_q)


def emit_config(cfg: RunConfig) -> dict:
    """Inverse of :func:`config_from_dict`."""
    out = cfg.model.to_dict()
    out["initial"] = cfg.initial.to_dict()
    out["envelope_variant"] = cfg.envelope_variant
    out["output_dir"] = cfg.output_dir
    out["formats"] = list(cfg.formats)
    if out["samples_per_decade"] is None:
        del out["samples_per_decade"]
    if cfg.sweep is not None:
        out["sweep"] = cfg.sweep
    return out


def _fmt(x: float) -> str:
    return f"{x:.15e}"


def _sample_row(s: TraceSample) -> list[float]:
    e = s.energy
    return [s.t, e.e_total, e.bilap_sq, e.vel_sq, e.grad_sq, e.coeff, s.dissipation, s.lower_env, s.upper_env]


def _json_float(x: float):
    return None if x is None or not math.isfinite(x) else x


def write_trace(trace: EnergyTrace, ec: EnvelopeConstants | None, path: str | os.PathLike, format: str = "csv") -> None:
    """Write a trace as CSV (fixed column set) or JSON (columns plus metadata)."""
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for s in trace.samples:
                fh.write(",".join(_fmt(x) for x in _sample_row(s)) + "\n")
    elif format == "json":
        doc = {
            "params_snapshot": trace.params_snapshot.to_dict(),
            "e0": trace.e0,
            "constants": ec.to_dict() if ec is not None else None,
            "samples": [dict(zip(CSV_COLUMNS, map(_json_float, _sample_row(s)))) for s in trace.samples],
        }
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown trace format {format!r}")


def read_trace(path: str | os.PathLike, params: ModelParams | None = None) -> EnergyTrace:
    """Read a CSV trace written by :func:`write_trace`."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ParseError(f"unexpected CSV header {header}", line=1)
        rows = [[float(x) for x in row] for row in reader if row]
    samples = [
        TraceSample(r[0], EnergyBreakdown(r[1], r[2], r[3], r[4], r[5]), r[6], r[7], r[8]) for r in rows
    ]
    e0 = samples[0].energy.e_total if samples else 0.0
    return EnergyTrace(samples, params or ModelParams(), e0)


# ---------------------------------------------------------------- subcommands


def _run(cfg: RunConfig):
    p = cfg.model
    ops = assemble_operators(p.length, p.n, p.kappa)
    init = make_initial(cfg.initial, ops)
    trace = simulate(p, init, ops, envelope_variant=cfg.envelope_variant)
    return ops, trace


def _write_outputs(trace: EnergyTrace, out: Path, formats: Sequence[str], stem: str = "trace") -> None:
    out.mkdir(parents=True, exist_ok=True)
    for fmt in formats:
        write_trace(trace, trace.constants, out / f"{stem}.{fmt}", fmt)


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    _, trace = _run(cfg)
    _write_outputs(trace, out, cfg.formats)
    print(f"simulated {len(trace)} samples, E0={trace.e0:.6e}, E(T)={trace.energies[-1]:.6e} -> {out}")
    return 0


def cmd_envelope(cfg: RunConfig, out: Path, args) -> int:
    p = cfg.model
    ops = assemble_operators(p.length, p.n, p.kappa)
    from .dynamics import energy

    e0 = energy(make_initial(cfg.initial, ops), ops, p.kappa, p.q).e_total
    ec = envelope_constants(e0, p, ops, cfg.envelope_variant)
    out.mkdir(parents=True, exist_ok=True)
    consts = ec.to_dict()
    consts["d_continuum"] = continuum_min_eigenvalue(p.length) ** -0.5
    (out / "constants.json").write_text(json.dumps(consts, indent=1, sort_keys=True) + "\n")
    t = sample_steps(p) * p.dt
    lo_t = lower_envelope(t, ec.with_variant("theorem"))
    lo_r = lower_envelope(t, ec.with_variant("remark"))
    hi = upper_envelope(t, ec)
    with (out / "envelope.csv").open("w") as fh:
        fh.write("t,lower_theorem,lower_remark,upper\n")
        for row in zip(t, lo_t, lo_r, hi):
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    print(f"d={ec.d:.6e} c'={ec.c_prime:.6e} K={ec.k_of_e0:.6e} J={ec.j_of_e0:.6e} E0={e0:.6e} -> {out}")
    return 0


def cmd_fit(cfg: RunConfig, out: Path, args) -> int:
    if args.trace:
        trace = read_trace(args.trace, cfg.model)
    else:
        _, trace = _run(cfg)
    power = analysis.fit_power_exponent(trace, args.tail_fraction)
    doc = {"power": power.to_dict(), "expected_exponent": -1.0 / cfg.model.q}
    try:
        doc["exponential"] = analysis.fit_decay(trace, "exponential", args.tail_fraction).to_dict()
    except BeamError as exc:
        doc["exponential"] = {"error": str(exc)}
    out.mkdir(parents=True, exist_ok=True)
    (out / "fit.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"exponent={power.exponent:.6g} r_squared={power.r_squared:.6f} window={power.window}")
    return 0


def cmd_verify(cfg: RunConfig, out: Path, args) -> int:
    p = cfg.model
    if p.variant != "frictional":
        raise ConfigError("verify applies to the frictional variant only")
    if p.alpha <= 0:
        raise ZeroDamping("verify needs alpha > 0")
    ops, trace = _run(cfg)
    ec = trace.constants
    checks = []

    rep = analysis.containment_report(trace, ec)
    checks.append(
        ("containment", rep.passed, f"min_margin_lo={rep.min_margin_lo:.4g} min_margin_hi={rep.min_margin_hi:.4g}")
    )
    try:
        nk = verify_nakao_hypothesis(trace, ec)
        checks.append(("nakao_hypothesis", nk.passed, f"worst_ratio={nk.worst_ratio:.4g}"))
    except BeamError as exc:
        checks.append(("nakao_hypothesis", False, str(exc)))

    z_sq = trace.column("bilap_sq") + trace.column("vel_sq")
    bound = (1.0 + ec.c_prime * p.kappa) * z_sq[0]
    worst = float(np.max(z_sq / bound)) if bound > 0 else 0.0
    checks.append(("a_priori_bound", worst <= 1.0 + 1e-12, f"max ||z||²/bound={worst:.6g}"))

    out.mkdir(parents=True, exist_ok=True)
    _write_outputs(trace, out, cfg.formats)
    report = [{"check": name, "passed": ok, "detail": detail} for name, ok, detail in checks]
    (out / "verify.json").write_text(json.dumps(report, indent=1) + "\n")
    for name, ok, detail in checks:
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return 0 if all(ok for _, ok, _ in checks) else 1


def _sweep_one(job):
    cfg, out, tail_fraction = job
    _, trace = _run(cfg)
    _write_outputs(trace, Path(out), cfg.formats)
    p = cfg.model
    row = {"q": p.q, "alpha": p.alpha, "kappa": p.kappa, "e0": trace.e0, "expected": -1.0 / p.q}
    try:
        fit = analysis.fit_power_exponent(trace, tail_fraction)
        row.update(exponent=fit.exponent, r_squared=fit.r_squared)
    except BeamError:
        row.update(exponent=float("nan"), r_squared=float("nan"))
    row["rel_error"] = abs(row["exponent"] - row["expected"]) / abs(row["expected"])
    return row


def sweep_threads() -> int:
    env = os.environ.get("BTBEAM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer BTBEAM_THREADS=%r", env)
    return os.cpu_count() or 1


def cmd_sweep(cfg: RunConfig, out: Path, args) -> int:
    base = cfg.model
    grid = cfg.sweep or {}
    qs = grid.get("q", [base.q])
    alphas = grid.get("alpha", [base.alpha])
    kappas = grid.get("kappa", [base.kappa])
    jobs = []
    for q, a, k in itertools.product(qs, alphas, kappas):
        model = validate_params(base.replace(q=q, alpha=a, kappa=k))
        sub = RunConfig(model, cfg.initial, cfg.envelope_variant, cfg.output_dir, cfg.formats, None)
        jobs.append((sub, str(out / f"run_q{q:g}_alpha{a:g}_kappa{k:g}"), args.tail_fraction))
    workers = min(sweep_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    out.mkdir(parents=True, exist_ok=True)
    cols = ("q", "alpha", "kappa", "e0", "exponent", "expected", "rel_error", "r_squared")
    with (out / "summary.csv").open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")
    for row in rows:
        print(
            f"q={row['q']:g} alpha={row['alpha']:g} kappa={row['kappa']:g}: "
            f"exponent={row['exponent']:.4f} (expected {row['expected']:.4f}, r²={row['r_squared']:.5f})"
        )
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "envelope": cmd_envelope,
    "fit": cmd_fit,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--format", choices=("csv", "json", "both"), help="trace format (overrides formats)")
    common.add_argument("--allow-low-q", action="store_true", help="permit q < 1/2 (exploratory)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="btbeam", description="Clamped beam with nonlocal energy damping.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate and write an energy trace")
    sub.add_parser("envelope", parents=[common], help="write envelope tables and constants")
    fit = sub.add_parser("fit", parents=[common], help="fit the tail decay exponent")
    fit.add_argument("--trace", help="fit this CSV trace instead of simulating")
    fit.add_argument("--tail-fraction", type=float, default=0.5)
    sub.add_parser("verify", parents=[common], help="containment, Nakao and a-priori checks")
    sweep = sub.add_parser("sweep", parents=[common], help="cartesian sweep over q, alpha, kappa")
    sweep.add_argument("--tail-fraction", type=float, default=0.5)
    return parser


def run_subcommand(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config, allow_low_q=args.allow_low_q)
        if args.format:
            formats = FORMATS if args.format == "both" else (args.format,)
            cfg = RunConfig(cfg.model, cfg.initial, cfg.envelope_variant, cfg.output_dir, tuple(formats), cfg.sweep)
        out = Path(args.out or cfg.output_dir)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, ValidationError, ZeroDamping, BadMode, FileMismatch, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
