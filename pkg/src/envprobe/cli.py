"""Batch front end: generate -> steer -> tomo -> verify -> lie.

Every stage reads the previous stage's artifact from the output directory
and writes its own, so running the stages one by one gives the same files
as ``pipeline``. ``report.json`` is rebuilt from the artifacts present after
each stage; wall-clock timings go to ``timing.json`` so reports stay
byte-identical between runs.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, jsonio, numerics
from .control import ControlProblem, controllability_report, named_controls
from .hilbert import Triple, partial_trace
from .scenarios import RNG_ALGORITHM, ScenarioSpec, generate
from .steering import (
    SplitError,
    SteeringConfig,
    SteeringError,
    Split,
    me_condition_check,
    run_steering,
    steered_triple,
)
from .tomography import (
    EquivalenceConfig,
    SolveError,
    SolveResult,
    SpectralError,
    StationarizeError,
    TomographyConfig,
    affine_distance,
    build_basis,
    identify,
    true_coefficients,
    verify_equivalence,
)

STAGES = ("generate", "steer", "tomo", "verify", "lie")

ARTIFACTS = {
    "config": "config.json",
    "triple": "triple.json",
    "steered": "steered.json",
    "delta_e": "delta_e.csv",
    "spectral": "spectral.json",
    "reconstruction": "reconstruction.json",
    "samples": "rho_sa_samples.csv",
    "verify": "verify.json",
    "lie": "lie.json",
    "report": "report.json",
    "report_csv": "report.csv",
    "timing": "timing.json",
}

STAGE_ERRORS = (SteeringError, SplitError, SpectralError, SolveError, StationarizeError,
                numerics.DimensionError, np.linalg.LinAlgError, FloatingPointError)


class ConfigError(Exception):
    """Bad or missing configuration; maps to exit code 1."""


class MissingArtifact(Exception):
    """An upstream stage has not been run; maps to exit code 1."""


class StageFailure(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# configuration


def resolve_config(raw: dict, seed: int | None = None, mc_filter: bool = False) -> dict:
    """Fill defaults and validate; the result is what gets echoed to ``config.json``."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - {"scenario", "steering", "tomography", "verify", "control"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "scenario" not in raw:
        raise ConfigError("config needs a 'scenario' section")
    try:
        scen = dict(raw["scenario"])
        if seed is not None:
            scen["seed"] = seed
        spec = ScenarioSpec.from_dict(scen)
        steer = dict(raw.get("steering", {}))
        steer.setdefault("rng_seed", spec.seed)
        if mc_filter:
            steer["mc_filter"] = True
        steer_cfg = SteeringConfig.from_dict(steer)
        tomo = dict(raw.get("tomography", {}))
        tomo.setdefault("rng_seed", spec.seed)
        tomo = dataclasses.asdict(TomographyConfig.from_dict(tomo))
        ver = dict(raw.get("verify", {}))
        ver.setdefault("rng_seed", spec.seed)
        ver_cfg = dataclasses.asdict(EquivalenceConfig.from_dict(ver))
        ctrl = dict(raw.get("control", {}))
        controls = ctrl.get("controls", ["X", "Y"] if spec.d_S == 2 else [])
        named_controls(controls, spec.d_S)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return {
        "scenario": spec.to_dict(),
        "steering": steer_cfg.to_dict(),
        "tomography": tomo,
        "verify": ver_cfg,
        "control": {"controls": controls},
    }


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


# ---------------------------------------------------------------------------
# artifact helpers


def _path(out: Path, key: str) -> Path:
    return out / ARTIFACTS[key]


def _read(out: Path, key: str, stage: str):
    p = _path(out, key)
    if not p.exists():
        raise MissingArtifact(f"stage {stage} needs {p.name}; run the upstream stage first")
    return jsonio.load(p)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _samples_csv(times, mats) -> str:
    n = mats.shape[1]
    idx = [f"{i}_{j}" for i in range(n) for j in range(n)]
    lines = [",".join(["t"] + [f"re_{k}" for k in idx] + [f"im_{k}" for k in idx])]
    for t, m in zip(times, mats):
        flat = m.reshape(-1)
        vals = [t] + list(flat.real) + list(flat.imag)
        lines.append(",".join(jsonio._fmt_float(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# stages


def stage_generate(out: Path, cfg: dict, full: bool = False) -> None:
    spec = ScenarioSpec.from_dict(cfg["scenario"])
    jsonio.dump(cfg, _path(out, "config"))
    jsonio.dump(generate(spec).to_dict(), _path(out, "triple"))


def stage_steer(out: Path, cfg: dict, full: bool = False) -> None:
    triple = Triple.from_dict(_read(out, "triple", "steer"))
    scfg = SteeringConfig.from_dict(cfg["steering"])
    state, trace = run_steering(triple, scfg)
    steered = steered_triple(triple, state)
    rep = me_condition_check(partial_trace(state, ["S", "A"]))
    jsonio.dump({"triple": steered.to_dict(), "trace": trace.to_dict(), "me_report": rep.to_dict()},
                _path(out, "steered"))
    _write_text(_path(out, "delta_e"), trace.to_csv())


def stage_tomo(out: Path, cfg: dict, full: bool = False) -> None:
    steered = Triple.from_dict(_read(out, "steered", "tomo")["triple"])
    res = identify(steered, TomographyConfig(**cfg["tomography"]))
    jsonio.dump(res.spectral.to_dict(), _path(out, "spectral"))
    payload = res.reconstruction.to_dict()
    payload.update({
        "dt": res.dt,
        "samples": int(res.times.size),
        "split": res.split.to_dict(),
        "triple": res.triple.to_dict(),
    })
    jsonio.dump(payload, _path(out, "reconstruction"))
    _write_text(_path(out, "samples"), _samples_csv(res.times, res.samples))


def stage_verify(out: Path, cfg: dict, full: bool = False) -> None:
    truth = Triple.from_dict(_read(out, "steered", "verify")["triple"])
    rec = _read(out, "reconstruction", "verify")
    ident = Triple.from_dict(rec["triple"])
    dev = verify_equivalence(truth, ident, EquivalenceConfig(**cfg["verify"]))
    split = Split.from_dict(rec["split"])
    basis = build_basis(split.d_S, split.r)
    h = np.asarray(rec["h_particular"], dtype=float)
    null = np.asarray(rec["null_basis"], dtype=float).reshape(-1, h.size).T
    try:
        h_true = true_coefficients(truth, split, basis)
        aff = affine_distance(h_true, SolveResult(h, null, rec["system_residual"]))
    except ValueError:
        aff = None  # support moves; no white-box coefficient vector exists
    jsonio.dump({"equivalence_deviation": dev, "true_affine_distance": aff}, _path(out, "verify"))


def stage_lie(out: Path, cfg: dict, full: bool = False) -> None:
    ident = Triple.from_dict(_read(out, "reconstruction", "lie")["triple"])
    controls = named_controls(cfg["control"]["controls"], ident.d_S)
    res, verdict = controllability_report(ControlProblem(ident.h_SE, controls), full)
    d = res.to_dict(full)
    d["verdict"] = verdict
    jsonio.dump(d, _path(out, "lie"))


STAGE_FUNCS = {
    "generate": stage_generate,
    "steer": stage_steer,
    "tomo": stage_tomo,
    "verify": stage_verify,
    "lie": stage_lie,
}


# ---------------------------------------------------------------------------
# report


def build_report(out: Path) -> dict:
    """Assemble ``report.json`` from whichever artifacts exist."""
    report = {"tool": {"name": "envprobe", "version": __version__}, "rng_algorithm": RNG_ALGORITHM}
    load = lambda key: jsonio.load(_path(out, key)) if _path(out, key).exists() else None  # noqa: E731
    cfg = load("config")
    if cfg is not None:
        report["config"] = cfg
    st = load("steered")
    if st is not None:
        tr = st["trace"]
        report["steering"] = {
            "K": tr["halted_at"],
            "t_K": tr["halt_time"],
            "restarts": tr["restarts"],
            "success_probs": [r["filter_success_prob"] for r in tr["rounds"]],
            "epsilon_c": [r["epsilon_c"] for r in tr["rounds"]],
        }
        report["me_report"] = st["me_report"]
    sp = load("spectral")
    if sp is not None:
        report["spectral"] = {"L": sp["L"], "theta": sp["theta"], "fit_residual": sp["fit_residual"]}
    rc = load("reconstruction")
    if rc is not None:
        report["reconstruction"] = {
            "system_residual": rc["system_residual"],
            "null_dim": rc["null_dim"],
            "closure_residual": rc["closure_residual"],
            "d_E_tilde": rc["triple"]["d_E"],
            "dt": rc["dt"],
            "samples": rc["samples"],
            "equivalence_deviation": None,
        }
    vf = load("verify")
    if vf is not None and "reconstruction" in report:
        report["reconstruction"]["equivalence_deviation"] = vf["equivalence_deviation"]
        report["reconstruction"]["true_affine_distance"] = vf["true_affine_distance"]
    lie = load("lie")
    if lie is not None:
        report["lie"] = {k: lie[k] for k in ("dimension", "fully_controllable", "has_identity", "truncated", "verdict")}
    return report


def _flatten(obj, prefix="") -> list:
    rows = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            rows += _flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            rows += _flatten(v, f"{prefix}[{i}]")
    elif isinstance(obj, list):
        rows.append((prefix, ";".join(_scalar(v) for v in obj)))
    else:
        rows.append((prefix, _scalar(obj)))
    return rows


def _scalar(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return jsonio._fmt_float(v)
    return str(v)


def write_report(out: Path, fmt: str) -> dict:
    report = build_report(out)
    jsonio.dump(report, _path(out, "report"))
    if fmt == "csv":
        text = "key,value\n" + "".join(f"{k},{v}\n" for k, v in _flatten(report))
        _write_text(_path(out, "report_csv"), text)
    return report


def _record_time(out: Path, stage: str, seconds: float) -> None:
    p = _path(out, "timing")
    timing = jsonio.load(p) if p.exists() else {}
    timing[stage] = seconds
    jsonio.dump(timing, p)


def run_stage(stage: str, out: Path, cfg: dict, fmt: str = "json", full: bool = False) -> None:
    t0 = time.perf_counter()
    try:
        STAGE_FUNCS[stage](out, cfg, full)
    except (MissingArtifact, ConfigError):
        raise
    except STAGE_ERRORS as exc:
        raise StageFailure(stage, exc) from exc
    _record_time(out, stage, time.perf_counter() - t0)
    write_report(out, fmt)


def _stage_config(args, out: Path) -> dict:
    if args.config is not None:
        return resolve_config(load_config(args.config), args.seed, args.mc_filter)
    p = _path(out, "config")
    if not p.exists():
        raise ConfigError("no --config given and no config.json in the output directory")
    return resolve_config(jsonio.load(p), args.seed, args.mc_filter)


def run_pipeline(cfg: dict, out: Path, fmt: str = "json", full: bool = False) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    for stage in STAGES:
        run_stage(stage, out, cfg, fmt, full)
    return build_report(out)


def _parse_sweep(text: str) -> range:
    m = re.fullmatch(r"seeds=(-?\d+)\.\.(-?\d+)", text.strip())
    if not m:
        raise ConfigError(f"--sweep expects seeds=a..b, got {text!r}")
    a, b = int(m.group(1)), int(m.group(2))
    if b < a:
        raise ConfigError("--sweep range is empty")
    return range(a, b + 1)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config (scenario, steering, tomography, verify, control)")
    common.add_argument("--out", type=Path, required=True, help="output directory for artifacts")
    common.add_argument("--seed", type=int, default=None, help="override scenario.seed")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="also write report.csv with csv")
    common.add_argument("--full", action="store_true", help="include the Lie algebra basis dump")
    common.add_argument("--mc-filter", action="store_true", help="sample filter outcomes instead of postselecting")

    parser = argparse.ArgumentParser(prog="envprobe", description="Identify an environment Hamiltonian through S and ancillas.")
    parser.add_argument("--version", action="version", version=f"envprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    pipe = sub.add_parser("pipeline", parents=[common], help="run all stages")
    pipe.add_argument("--sweep", default=None, help="seeds=a..b: one run per seed in OUT/seed_<n>")
    st = sub.add_parser("stage", parents=[common], help="run a single stage")
    st.add_argument("name", choices=STAGES)
    cmp_ = sub.add_parser("compare", help="equivalence deviation between two triple files")
    cmp_.add_argument("left", type=Path)
    cmp_.add_argument("right", type=Path)
    cmp_.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_pipeline(args) -> int:
    if args.config is None:
        raise ConfigError("pipeline needs --config")
    raw = load_config(args.config)
    if args.sweep is None:
        run_pipeline(resolve_config(raw, args.seed, args.mc_filter), args.out, args.format, args.full)
        return 0
    summary = []
    for seed in _parse_sweep(args.sweep):
        cfg = resolve_config(raw, seed, args.mc_filter)
        run_dir = args.out / f"seed_{seed}"
        try:
            rep = run_pipeline(cfg, run_dir, args.format, args.full)
            summary.append({"seed": seed, "ok": True,
                            "equivalence_deviation": rep["reconstruction"]["equivalence_deviation"]})
        except StageFailure as exc:
            print(f"seed {seed}: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
            summary.append({"seed": seed, "ok": False, "failed_stage": exc.stage})
    args.out.mkdir(parents=True, exist_ok=True)
    jsonio.dump({"runs": summary}, args.out / "sweep.json")
    return 0 if all(r["ok"] for r in summary) else 2


def _cmd_stage(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    run_stage(args.name, args.out, _stage_config(args, args.out), args.format, args.full)
    return 0


def _cmd_compare(args) -> int:
    try:
        t1 = Triple.from_dict(_triple_payload(jsonio.load(args.left)))
        t2 = Triple.from_dict(_triple_payload(jsonio.load(args.right)))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read triples: {exc}") from None
    dev = verify_equivalence(t1, t2, EquivalenceConfig(rng_seed=args.seed))
    print(jsonio.dumps({"equivalence_deviation": dev}))
    return 0


def _triple_payload(obj: dict) -> dict:
    return obj["triple"] if "triple" in obj else obj


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"pipeline": _cmd_pipeline, "stage": _cmd_stage, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except (ConfigError, MissingArtifact) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageFailure as exc:
        print(f"stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
