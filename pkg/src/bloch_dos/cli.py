"""Configuration-driven command-line front end.

Commands
--------
bands            eigenvalue dump of the fibre operator along a list of k-points
ids              integrated density of states at one energy
window           windowed counting measure N(lam+eps) - N(lam) with its floor
fraction         Monte Carlo fraction of regular directions on the unit sphere
verify-decay     coefficient-decay bound check on one eigenpair
verify-gradient  group-velocity bound with a finite-difference cross-check

Configs are JSON documents validated against a strict schema (unknown keys
rejected).  All randomness is seeded from the config, never from the clock.
Every artifact embeds the resolved config — the first line of a CSV, the
"config" key of a JSON report — and identical configs produce byte-identical
artifacts.

Exit status: 0 success, 2 configuration/validation error, 3 solver failure,
4 violated mathematical precondition (for example an eigenvalue below the
admissible threshold).
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .decay import FD_STEP, verify_decay, verify_gradient
from .errors import ConfigError, PreconditionError, SolverError
from .fibre import assemble, solve_dense, suggest_cutoff
from .geometry import (
    GeometryParams,
    asymptotic_theta_radius,
    fraction_ci_halfwidth,
    regular_direction_fraction,
)
from .ids import QuadratureGrid, ids, window
from .lattice import DualLattice, Lattice, dual_lattice
from .potential import PotentialSpec

DEFAULT_SEED = 0

#: Dense band dumps above this basis size are refused; use a smaller cutoff.
BANDS_DENSE_LIMIT = 4000

_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 2}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

_COEFF_RECORD = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "re"],
    "properties": {
        "n": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "re": {"type": "number"},
        "im": {"type": "number"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "command", "lattice", "params"],
    "properties": {
        "schema_version": {"const": 1},
        "command": {
            "enum": ["bands", "ids", "window", "fraction", "verify-decay", "verify-gradient"]
        },
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["basis"],
            "properties": {
                "basis": {"type": "array", "minItems": 2, "items": _VECTOR},
            },
        },
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["coefficients"],
            "properties": {
                "coefficients": {"type": "array", "items": _COEFF_RECORD},
            },
        },
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "timing_in_artifacts": {"type": "boolean"},
    },
}

PARAM_SCHEMAS = {
    "bands": {
        "type": "object",
        "additionalProperties": False,
        "required": ["k_points", "cutoff", "num_bands"],
        "properties": {
            "k_points": {"type": "array", "minItems": 1, "items": _VECTOR},
            "cutoff": _POSITIVE,
            "num_bands": {"type": "integer", "minimum": 1},
        },
    },
    "ids": {
        "type": "object",
        "additionalProperties": False,
        "required": ["lambda", "grid_per_dim"],
        "properties": {
            "lambda": {"type": "number"},
            "grid_per_dim": {"type": "integer", "minimum": 1},
            "cutoff": _POSITIVE,
            "buffer": {"type": "number", "minimum": 0},
            "stabilize": {"type": "boolean"},
        },
    },
    "window": {
        "type": "object",
        "additionalProperties": False,
        "required": ["lambda", "epsilon", "grid_per_dim"],
        "properties": {
            "lambda": {"type": "number"},
            "epsilon": {"type": "number", "exclusiveMinimum": 0},
            "grid_per_dim": {"type": "integer", "minimum": 1},
            "cutoff": _POSITIVE,
            "buffer": {"type": "number", "minimum": 0},
            "stabilize": {"type": "boolean"},
        },
    },
    "fraction": {
        "type": "object",
        "additionalProperties": False,
        "required": ["rho", "v", "theta_radius", "samples"],
        "properties": {
            "rho": _POSITIVE,
            "v": {"type": "number", "minimum": 0},
            "theta_radius": {
                "anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "asymptotic"}]
            },
            "samples": {"type": "integer", "minimum": 1000},
        },
    },
    "verify-decay": {
        "type": "object",
        "additionalProperties": False,
        "required": ["k", "band_target", "eta", "cutoff"],
        "properties": {
            "k": _VECTOR,
            "band_target": {"type": "number"},
            "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "cutoff": _POSITIVE,
        },
    },
    "verify-gradient": {
        "type": "object",
        "additionalProperties": False,
        "required": ["k", "band_target", "eta", "cutoff"],
        "properties": {
            "k": _VECTOR,
            "band_target": {"type": "number"},
            "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "cutoff": _POSITIVE,
            "fd_step": {"type": "number", "exclusiveMinimum": 0},
        },
    },
}

COUNT_HEADER = ("lambda", "epsilon", "G", "cutoff", "value/window", "floor", "ratio", "wall_time_ms")
FRACTION_HEADER = ("rho", "v", "theta_radius", "samples", "fraction", "ci_halfwidth")


@dataclass(frozen=True)
class RunConfig:
    """Validated, resolved run description.

    `resolved` is the embeddable form of the config: defaults applied, with
    the result-irrelevant keys (output path, worker count) stripped, so that
    identical inputs give identical artifacts wherever they are written.
    """

    command: str
    lattice: Lattice
    dual: DualLattice
    potential: PotentialSpec | None
    params: Mapping
    seed: int
    workers: int
    out: Path
    timing_in_artifacts: bool
    resolved: Mapping


def _schema_error(err: jsonschema.ValidationError, prefix: str = "") -> ConfigError:
    path = "/".join(str(p) for p in err.absolute_path)
    loc = "/".join(x for x in (prefix, path) if x)
    return ConfigError(f"config invalid at {loc or '<root>'}: {err.message}")


def validate_config_dict(doc) -> None:
    """Schema-validate a config document; unknown keys are rejected."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(err) from err
    try:
        jsonschema.validate(doc["params"], PARAM_SCHEMAS[doc["command"]])
    except jsonschema.ValidationError as err:
        raise _schema_error(err, "params") from err


def config_from_dict(
    doc,
    *,
    out: str | Path | None = None,
    workers: int | None = None,
    command: str | None = None,
) -> RunConfig:
    """Build a RunConfig from a parsed document, applying CLI overrides."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be an object, got {type(doc).__name__}")
    validate_config_dict(doc)
    if command is not None and doc["command"] != command:
        raise ConfigError(
            f"command-line command {command!r} does not match config command {doc['command']!r}"
        )
    basis = np.asarray(doc["lattice"]["basis"], dtype=float)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise ConfigError(f"lattice basis must be a square matrix, got shape {basis.shape}")
    try:
        lattice = Lattice(basis=basis)
        dual = dual_lattice(lattice)
    except (np.linalg.LinAlgError, ValueError, PreconditionError) as err:
        raise ConfigError(f"lattice basis rejected: {err}") from err
    potential = None
    if "potential" in doc:
        potential = PotentialSpec.from_records(dual, doc["potential"]["coefficients"])
    if potential is None and doc["command"] != "fraction":
        raise ConfigError(f"command {doc['command']!r} requires a potential section")
    eff_workers = int(workers) if workers is not None else int(doc.get("workers", 1))
    if eff_workers < 1:
        raise ConfigError(f"workers must be at least 1, got {eff_workers}")
    eff_out = Path(out) if out is not None else Path(doc.get("out", "."))
    resolved = copy.deepcopy({k: v for k, v in doc.items() if k not in ("out", "workers")})
    resolved["seed"] = int(doc.get("seed", DEFAULT_SEED))
    resolved.setdefault("timing_in_artifacts", False)
    return RunConfig(
        command=doc["command"],
        lattice=lattice,
        dual=dual,
        potential=potential,
        params=doc["params"],
        seed=resolved["seed"],
        workers=eff_workers,
        out=eff_out,
        timing_in_artifacts=resolved["timing_in_artifacts"],
        resolved=resolved,
    )


def load_config(
    path: str | Path,
    *,
    out: str | Path | None = None,
    workers: int | None = None,
    command: str | None = None,
) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {p}: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {p} is not valid JSON: {err}") from err
    return config_from_dict(doc, out=out, workers=workers, command=command)


# ---------------------------------------------------------------------------
# artifact writers


def _fmt_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _config_line(cfg: RunConfig) -> str:
    return "# config " + json.dumps(cfg.resolved, sort_keys=True, separators=(",", ":"))


def embedded_config(csv_text: str) -> dict:
    """Recover the resolved config from a CSV artifact's leading comment."""
    first = csv_text.splitlines()[0]
    marker = "# config "
    if not first.startswith(marker):
        raise ConfigError("artifact does not start with an embedded config line")
    return json.loads(first[len(marker):])


def _write_csv(path: Path, cfg: RunConfig, header, rows) -> None:
    lines = [_config_line(cfg), ",".join(header)]
    lines.extend(",".join(_fmt_cell(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _json_safe(obj):
    if isinstance(obj, Mapping):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def _write_json(path: Path, cfg: RunConfig, report: dict) -> None:
    doc = {"config": cfg.resolved, "report": _json_safe(report)}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _elapsed_ms(cfg: RunConfig, t0: float) -> int:
    return int(round((time.perf_counter() - t0) * 1000.0)) if cfg.timing_in_artifacts else 0


# ---------------------------------------------------------------------------
# commands


def _resolve_cutoff(cfg: RunConfig, lam: float) -> float:
    has_cut = "cutoff" in cfg.params
    has_buf = "buffer" in cfg.params
    if has_cut == has_buf:
        raise ConfigError("exactly one of params.cutoff or params.buffer must be given")
    if has_cut:
        return float(cfg.params["cutoff"])
    return suggest_cutoff(lam, cfg.potential.coefficient_sum_bound, float(cfg.params["buffer"]))


def _require_dim(cfg: RunConfig, vec, what: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (cfg.lattice.dim,):
        raise ConfigError(f"{what} must have {cfg.lattice.dim} components, got {arr.shape}")
    return arr


def _run_ids(cfg: RunConfig):
    lam = float(cfg.params["lambda"])
    G = int(cfg.params["grid_per_dim"])
    cutoff = _resolve_cutoff(cfg, lam)
    grid = QuadratureGrid(cfg.dual, G)
    t0 = time.perf_counter()
    rep = ids(
        cfg.potential,
        lam,
        grid,
        cutoff,
        workers=cfg.workers,
        stabilize=bool(cfg.params.get("stabilize", True)),
    )
    row = (lam, None, G, cutoff, rep.value, None, None, _elapsed_ms(cfg, t0))
    path = cfg.out / "ids.csv"
    _write_csv(path, cfg, COUNT_HEADER, [row])
    summary = (
        f"ids: lambda={lam:g} value={rep.value:.8g} "
        f"free_reference={rep.free_reference:.8g} -> {path}"
    )
    return summary, [path]


def _run_window(cfg: RunConfig):
    lam = float(cfg.params["lambda"])
    eps = float(cfg.params["epsilon"])
    G = int(cfg.params["grid_per_dim"])
    cutoff = _resolve_cutoff(cfg, lam + eps)
    grid = QuadratureGrid(cfg.dual, G)
    t0 = time.perf_counter()
    rep = window(
        cfg.potential,
        lam,
        eps,
        grid,
        cutoff,
        workers=cfg.workers,
        stabilize=bool(cfg.params.get("stabilize", True)),
    )
    row = (lam, eps, G, cutoff, rep.window, rep.floor, rep.ratio, _elapsed_ms(cfg, t0))
    path = cfg.out / "window.csv"
    _write_csv(path, cfg, COUNT_HEADER, [row])
    summary = (
        f"window: lambda={lam:g} epsilon={eps:g} window={rep.window:.8g} "
        f"floor={rep.floor:.8g} ratio={rep.ratio:.6g} -> {path}"
    )
    return summary, [path]


def _run_fraction(cfg: RunConfig):
    rho = float(cfg.params["rho"])
    v = float(cfg.params["v"])
    samples = int(cfg.params["samples"])
    d = cfg.lattice.dim
    theta = cfg.params["theta_radius"]
    theta = asymptotic_theta_radius(rho, d) if theta == "asymptotic" else float(theta)
    gp = GeometryParams(rho=rho, v=v, d=d, theta_radius=theta)
    frac = regular_direction_fraction(gp, cfg.dual, samples, seed=cfg.seed)
    ci = fraction_ci_halfwidth(frac, samples)
    path = cfg.out / "fraction.csv"
    _write_csv(path, cfg, FRACTION_HEADER, [(rho, v, theta, samples, frac, ci)])
    summary = f"fraction: rho={rho:g} fraction={frac:.6g} ci_halfwidth={ci:.3g} -> {path}"
    return summary, [path]


def _run_bands(cfg: RunConfig):
    cutoff = float(cfg.params["cutoff"])
    num_bands = int(cfg.params["num_bands"])
    k_points = [_require_dim(cfg, k, "each k-point") for k in cfg.params["k_points"]]
    d = cfg.lattice.dim
    header = ("k_index", *(f"k{j + 1}" for j in range(d)), "band", "zeta")
    rows = []
    for i, k in enumerate(k_points):
        A = assemble(cfg.potential, k, cutoff)
        if A.n > BANDS_DENSE_LIMIT:
            raise PreconditionError(
                f"basis size {A.n} exceeds the dense band-dump limit "
                f"{BANDS_DENSE_LIMIT}; reduce the cutoff"
            )
        sols = solve_dense(A)
        if num_bands > len(sols):
            raise PreconditionError(
                f"requested {num_bands} bands but the basis at cutoff {cutoff} "
                f"only carries {len(sols)}"
            )
        rows.extend((i, *k, j, sols[j].zeta) for j in range(num_bands))
    path = cfg.out / "bands.csv"
    _write_csv(path, cfg, header, rows)
    summary = f"bands: {len(k_points)} k-points x {num_bands} bands -> {path}"
    return summary, [path]


def _constants_payload(constants) -> dict:
    return {
        "d": constants.d,
        "eta": constants.eta,
        "m": constants.m,
        "kappa": constants.kappa,
        "zeta0": constants.zeta0,
        "Mm_chain": list(constants.Mm_chain),
        "W": constants.W,
        "Q": constants.Q,
    }


def _run_verify_decay(cfg: RunConfig):
    k = _require_dim(cfg, cfg.params["k"], "k")
    rep = verify_decay(
        cfg.potential,
        k,
        float(cfg.params["band_target"]),
        float(cfg.params["eta"]),
        float(cfg.params["cutoff"]),
    )
    payload = {
        "zeta": rep.zeta,
        "threshold_radius": rep.threshold_radius,
        "checked": rep.checked,
        "violations": [
            {"n": list(n), "amplitude": amp, "bound": bound} for n, amp, bound in rep.violations
        ],
        "margin_min": rep.margin_min,
        "gap": rep.gap,
        "near_degenerate": rep.near_degenerate,
        "k": list(rep.k),
        "cutoff": rep.cutoff,
        "constants": _constants_payload(rep.constants),
    }
    path = cfg.out / "verify-decay.json"
    _write_json(path, cfg, payload)
    summary = (
        f"verify-decay: zeta={rep.zeta:.8g} checked={rep.checked} "
        f"violations={len(rep.violations)} margin_min={rep.margin_min:.6g} -> {path}"
    )
    return summary, [path]


def _run_verify_gradient(cfg: RunConfig):
    k = _require_dim(cfg, cfg.params["k"], "k")
    rep = verify_gradient(
        cfg.potential,
        k,
        float(cfg.params["band_target"]),
        float(cfg.params["eta"]),
        float(cfg.params["cutoff"]),
        fd_step=float(cfg.params.get("fd_step", FD_STEP)),
    )
    payload = {
        "zeta": rep.zeta,
        "gap": rep.gap,
        "hf_velocity": rep.hf_velocity,
        "fd_velocity": rep.fd_velocity,
        "speed_bound": rep.speed_bound,
        "bound_ok": rep.bound_ok,
        "fd_mismatch": rep.fd_mismatch,
        "constants": _constants_payload(rep.constants),
    }
    path = cfg.out / "verify-gradient.json"
    _write_json(path, cfg, payload)
    summary = (
        f"verify-gradient: zeta={rep.zeta:.8g} |hf|={rep.hf_speed:.8g} "
        f"speed_bound={rep.speed_bound:.8g} bound_ok={rep.bound_ok} -> {path}"
    )
    return summary, [path]


_COMMANDS = {
    "bands": _run_bands,
    "ids": _run_ids,
    "window": _run_window,
    "fraction": _run_fraction,
    "verify-decay": _run_verify_decay,
    "verify-gradient": _run_verify_gradient,
}


def run(cfg: RunConfig) -> int:
    """Execute a validated config; returns the process exit status."""
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"error: cannot create output directory {cfg.out}: {err}", file=sys.stderr)
        return 2
    try:
        summary, _ = _COMMANDS[cfg.command](cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except SolverError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except PreconditionError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    print(summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bloch-dos",
        description="Band structure, IDS, windowed DOS, and bound verification "
        "for periodic Schrodinger operators.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to a JSON config")
    parser.add_argument("--out", default=None, help="output directory (default: config or cwd)")
    parser.add_argument("--workers", type=int, default=None, help="worker processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out=args.out, workers=args.workers, command=args.command)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
