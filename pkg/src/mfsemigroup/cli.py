"""Command-line pipelines over the library: verify, spectra, fields, bounds.

Configuration is a strict JSON document (unknown keys rejected, maps and
probabilities never defaulted).  Commands write CSV/JSON/SVG/PNG files
into the configured output directory and merge scalar results into a
versioned summary.json; reruns with the same config and seeds are
byte-identical for CSV/JSON.  Exit codes: 0 ok, 2 config error,
3 condition-check failure, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MFSemigroupError, NotPolynomial
from .julia import (
    ConditionReport,
    build_julia_cloud,
    check_expansion,
    check_separation,
    repelling_fixed_point,
    save_cloud,
)
from .rational import MultiMap, SpherePoint, rmap_from_json, rmap_to_json
from .spectrum import (
    rigidity_test,
    spectrum_parametric,
    write_spectrum_csv,
    write_spectrum_svg,
)
from .thermo import (
    HolderFamily,
    auto_depth,
    build_leaf_tables,
    free_energy_table,
    gamma_root,
    write_free_energy_csv,
)
from .randdyn import (
    TrapRegion,
    alpha_minus_bound,
    coliseum_fixed_point,
    coliseum_monte_carlo,
    estimate_escape_radius,
    holder_survey,
    save_field,
    save_field_png,
    write_holder_csv,
)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONDITION = 3
EXIT_NUMERIC = 4

EXPANSION_DEPTH = 6
EXPANSION_SAMPLES = 100


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    maps: MultiMap
    probabilities: list[float]
    potential: HolderFamily
    potential_kind: str
    beta_min: float
    beta_max: float
    beta_steps: int
    depth: int | str
    julia_target_count: int
    julia_rng_seed: int
    coliseum: dict = dc_field(default_factory=dict)
    holder: dict = dc_field(default_factory=dict)
    bound: dict = dc_field(default_factory=dict)
    output_dir: str = "out"

    def beta_grid(self) -> np.ndarray:
        return np.linspace(self.beta_min, self.beta_max, self.beta_steps)

    def resolve_depth(self) -> int:
        return auto_depth(self.maps) if self.depth == "auto" else int(self.depth)


def _reject_unknown(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required key '{key}'")
    return d[key]


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(
        raw,
        {
            "maps", "probabilities", "potential", "beta", "depth",
            "julia", "coliseum", "holder", "bound", "output_dir",
        },
        "config",
    )

    maps_raw = _need(raw, "maps", "config")
    if not isinstance(maps_raw, list) or not maps_raw:
        raise ConfigError("maps: need a nonempty list of rational-map objects")
    try:
        mm = MultiMap(tuple(rmap_from_json(m) for m in maps_raw))
    except (ValueError, MFSemigroupError) as e:
        raise ConfigError(f"maps: {e}") from e
    k = len(mm.maps)

    probs_raw = _need(raw, "probabilities", "config")
    if not isinstance(probs_raw, list) or len(probs_raw) != k:
        raise ConfigError(f"probabilities: need exactly {k} entries (one per map)")
    probs = [float(p) for p in probs_raw]
    if any(not (0.0 < p < 1.0) for p in probs):
        raise ConfigError("probabilities: every entry must lie strictly in (0, 1)")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError(f"probabilities: sum is {sum(probs)!r}, must be 1 within 1e-9")

    pot = raw.get("potential", {"kind": "log_prob"})
    _reject_unknown(pot, {"kind", "values"}, "potential")
    kind = pot.get("kind", "log_prob")
    if kind == "log_prob":
        family = HolderFamily.log_prob(probs)
    elif kind == "constant":
        vals = _need(pot, "values", "potential")
        if len(vals) != k:
            raise ConfigError(f"potential.values: need exactly {k} entries")
        family = HolderFamily.constant(vals)
    elif kind == "lyapunov":
        family = HolderFamily.scalar(-1.0)
    else:
        raise ConfigError(f"potential.kind: unknown kind {kind!r}")

    beta = raw.get("beta", {"min": -4.0, "max": 4.0, "steps": 33})
    _reject_unknown(beta, {"min", "max", "steps"}, "beta")
    b_min, b_max = float(beta.get("min", -4.0)), float(beta.get("max", 4.0))
    b_steps = int(beta.get("steps", 33))
    if b_steps < 5:
        raise ConfigError(f"beta.steps: {b_steps} < 5")
    if not b_min < b_max:
        raise ConfigError(f"beta: min {b_min} must be < max {b_max}")

    depth = raw.get("depth", "auto")
    if depth != "auto":
        depth = int(depth)
        if depth < 1:
            raise ConfigError(f"depth: {depth} < 1")

    julia = raw.get("julia", {})
    _reject_unknown(julia, {"target_count", "rng_seed"}, "julia")
    target = int(julia.get("target_count", 5000))
    if target < 1:
        raise ConfigError("julia.target_count: must be >= 1")

    coliseum = raw.get("coliseum", {})
    _reject_unknown(
        coliseum,
        {"window", "resolution", "samples", "escape_radius", "traps", "tol", "mode", "rng_seed"},
        "coliseum",
    )
    res = coliseum.get("resolution", [256, 256])
    if len(res) != 2 or any(not (1 <= int(r) <= 8192) for r in res):
        raise ConfigError(f"coliseum.resolution: {res} outside [1, 8192]")
    mode = coliseum.get("mode", "monte-carlo")
    if mode not in ("monte-carlo", "fixed-point"):
        raise ConfigError(f"coliseum.mode: unknown mode {mode!r}")
    for t in coliseum.get("traps", []):
        _reject_unknown(t, {"center", "radius", "label"}, "coliseum.traps[]")

    holder = raw.get("holder", {})
    _reject_unknown(holder, {"n_points", "radii", "rng_seed"}, "holder")
    radii = holder.get("radii", {})
    _reject_unknown(radii, {"r0", "ratio", "count"}, "holder.radii")

    bound = raw.get("bound", {})
    _reject_unknown(bound, {"n_sequences", "seq_len", "rng_seed"}, "bound")

    return RunConfig(
        maps=mm,
        probabilities=probs,
        potential=family,
        potential_kind=kind,
        beta_min=b_min,
        beta_max=b_max,
        beta_steps=b_steps,
        depth=depth,
        julia_target_count=target,
        julia_rng_seed=int(julia.get("rng_seed", 0)),
        coliseum=coliseum,
        holder=holder,
        bound=bound,
        output_dir=str(raw.get("output_dir", "out")),
    )


def _holder_radii(cfg: RunConfig) -> list[float]:
    r = cfg.holder.get("radii", {})
    r0 = float(r.get("r0", 0.02))
    ratio = float(r.get("ratio", 1.5))
    count = int(r.get("count", 8))
    if r0 <= 0 or ratio <= 1.0 or count < 5:
        raise ConfigError("holder.radii: need r0 > 0, ratio > 1, count >= 5")
    return [r0 * ratio**j for j in range(count)]


def _traps(cfg: RunConfig) -> list[TrapRegion]:
    out = []
    for t in cfg.coliseum.get("traps", []):
        c = t.get("center", [0.0, 0.0])
        out.append(
            TrapRegion(
                SpherePoint(complex(float(c[0]), float(c[1]))),
                float(t.get("radius", 0.0)),
                str(t.get("label", "")),
            )
        )
    return out


# ---------------------------------------------------------------------------
# summary persistence


def _summary_path(out_dir: Path) -> Path:
    return out_dir / "summary.json"


def _load_summary(out_dir: Path) -> dict:
    p = _summary_path(out_dir)
    if p.exists():
        with open(p) as fh:
            return json.load(fh)
    return {"schema_version": SCHEMA_VERSION, "files": []}


def _save_summary(out_dir: Path, summary: dict) -> None:
    summary["schema_version"] = SCHEMA_VERSION
    summary["files"] = sorted(set(summary.get("files", [])))
    with open(_summary_path(out_dir), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report_dict(rep: ConditionReport) -> dict:
    return {
        "kind": rep.kind,
        "passed": rep.passed,
        "margin": rep.margin if math.isfinite(rep.margin) else "inf",
        "details": rep.details,
    }


# ---------------------------------------------------------------------------
# command bodies (shared pieces)


def _run_verify(cfg: RunConfig, out_dir: Path) -> tuple[bool, dict]:
    seed = repelling_fixed_point(cfg.maps.maps[0], 0)
    cloud = build_julia_cloud(cfg.maps, seed, cfg.julia_target_count, cfg.julia_rng_seed)
    sep = check_separation(cfg.maps, cloud)
    exp = check_expansion(
        cfg.maps, cloud, EXPANSION_DEPTH, EXPANSION_SAMPLES, rng_seed=cfg.julia_rng_seed
    )
    hyp = ConditionReport(
        "hyperbolicity",
        sep.passed and exp.passed,
        min(sep.margin, exp.margin),
        "separation and fiberwise expansion jointly",
    )
    save_cloud(cloud, out_dir / "cloud.csv")
    summary = _load_summary(out_dir)
    summary["conditions"] = {
        "separation": _report_dict(sep),
        "expansion": _report_dict(exp),
        "hyperbolicity": _report_dict(hyp),
    }
    summary["files"] = summary.get("files", []) + ["cloud.csv"]
    _save_summary(out_dir, summary)
    for rep in (sep, exp):
        state = "passed" if rep.passed else "FAILED"
        print(f"{rep.kind}: {state} (margin {rep.margin:.6g}) — {rep.details}")
    return hyp.passed, summary


def _spectrum_pipeline(cfg: RunConfig, out_dir: Path):
    depth = cfg.resolve_depth()
    ft = free_energy_table(cfg.maps, cfg.potential, cfg.beta_grid(), depth)
    tables = build_leaf_tables(cfg.maps, cfg.potential, ft.base, min(depth, 4))
    gamma = gamma_root(cfg.maps, cfg.potential, tables)
    spec = spectrum_parametric(ft, gamma=gamma)
    write_free_energy_csv(ft, out_dir / "free_energy.csv")
    write_spectrum_csv(spec, out_dir / "spectrum.csv")
    write_spectrum_svg(spec, out_dir / "spectrum.svg")
    summary = _load_summary(out_dir)
    summary.update(
        {
            "maps": [rmap_to_json(f) for f in cfg.maps.maps],
            "probabilities": cfg.probabilities,
            "potential": cfg.potential_kind,
            "depth": depth,
            "delta": spec.delta,
            "gamma": spec.gamma,
            "alpha_minus": spec.alpha_minus,
            "alpha_zero": spec.alpha_zero,
            "alpha_plus": spec.alpha_plus,
            "trivial": spec.trivial,
            "lin_residual": spec.lin_residual,
            "max_gap": float(np.nanmax(ft.gaps)),
        }
    )
    summary["files"] = summary.get("files", []) + [
        "free_energy.csv", "spectrum.csv", "spectrum.svg",
    ]
    _save_summary(out_dir, summary)
    print(
        f"delta={spec.delta:.6f} gamma={spec.gamma:.6f} "
        f"alpha-=[{spec.alpha_minus:.6f}] alpha0={spec.alpha_zero:.6f} "
        f"alpha+=[{spec.alpha_plus:.6f}] trivial={spec.trivial}"
    )
    return summary, ft


def _rigidity_constants(cfg: RunConfig) -> list[float]:
    if cfg.potential_kind == "constant":
        return list(cfg.potential.values)
    if cfg.potential_kind == "log_prob":
        return [math.log(p) for p in cfg.probabilities]
    raise ConfigError("rigidity needs a constant or log_prob potential family")


def _coliseum_field(cfg: RunConfig, out_dir: Path):
    col = cfg.coliseum
    window = tuple(float(v) for v in col.get("window", [-4.0, 4.0, -4.0, 4.0]))
    resolution = tuple(int(v) for v in col.get("resolution", [256, 256]))
    traps = _traps(cfg)
    mode = col.get("mode", "monte-carlo")
    if mode == "fixed-point":
        f = coliseum_fixed_point(
            cfg.maps,
            cfg.probabilities,
            window,
            resolution,
            traps,
            tol=float(col.get("tol", 1e-6)),
            escape_radius=col.get("escape_radius"),
        )
    else:
        radius = col.get("escape_radius")
        if radius is None:
            radius = estimate_escape_radius(cfg.maps)
        f = coliseum_monte_carlo(
            cfg.maps,
            cfg.probabilities,
            window,
            resolution,
            int(col.get("samples", 1000)),
            float(radius),
            traps,
            int(col.get("rng_seed", 0)),
        )
    save_field(f, out_dir / "field.grid")
    save_field_png(f, out_dir / "field.png")
    return f


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    ok, _ = _run_verify(cfg, out_dir)
    return EXIT_OK if ok else EXIT_CONDITION


def cmd_pressure(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    depth = cfg.resolve_depth()
    ft = free_energy_table(cfg.maps, cfg.potential, cfg.beta_grid(), depth)
    write_free_energy_csv(ft, out_dir / "free_energy.csv")
    summary = _load_summary(out_dir)
    j0 = int(np.argmin(np.abs(ft.betas)))
    summary["delta"] = float(ft.t_values[j0])
    summary["depth"] = depth
    summary["files"] = summary.get("files", []) + ["free_energy.csv"]
    _save_summary(out_dir, summary)
    print(f"free energy on {len(ft.betas)} beta points, t(0)={ft.t_values[j0]:.6f}")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    ok, _ = _run_verify(cfg, out_dir)
    if not ok and not force:
        print("condition checks failed; pass --force to compute the spectrum anyway")
        return EXIT_CONDITION
    _spectrum_pipeline(cfg, out_dir)
    return EXIT_OK


def _rigidity_step(cfg: RunConfig, out_dir: Path, summary: dict, ft) -> None:
    c = _rigidity_constants(cfg)
    rep = rigidity_test(cfg.maps, c, ft, summary["gamma"], summary["delta"])
    summary["rigidity"] = {
        "verdict": rep.verdict,
        "lambda_hat": rep.lambda_hat,
        "lambda_values": list(rep.lambda_values),
        "lambda_spread": rep.lambda_spread,
        "lin_residual": rep.lin_residual,
        "details": rep.details,
    }
    _save_summary(out_dir, summary)
    print(f"rigidity verdict: {rep.verdict} (lambda_hat {rep.lambda_hat:.6f})")


def cmd_rigidity(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    ok, _ = _run_verify(cfg, out_dir)
    if not ok and not force:
        print("condition checks failed; pass --force to run the rigidity analysis anyway")
        return EXIT_CONDITION
    summary, ft = _spectrum_pipeline(cfg, out_dir)
    _rigidity_step(cfg, out_dir, summary, ft)
    return EXIT_OK


def cmd_coliseum(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    f = _coliseum_field(cfg, out_dir)
    summary = _load_summary(out_dir)
    summary["coliseum"] = {k: v for k, v in f.meta.items()}
    summary["files"] = summary.get("files", []) + ["field.grid", "field.png"]
    _save_summary(out_dir, summary)
    if f.meta["mode"] == "fixed-point":
        print(f"field converged: residual {f.meta['residual']:.3g} in {f.meta['iterations']} iterations")
    else:
        print(f"field sampled: {f.meta['samples']} per pixel, {f.meta['flagged']} flagged")
    return EXIT_OK


def cmd_hoelder(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    f = _coliseum_field(cfg, out_dir)
    seed = repelling_fixed_point(cfg.maps.maps[0], 0)
    cloud = build_julia_cloud(cfg.maps, seed, cfg.julia_target_count, cfg.julia_rng_seed)
    summary = _load_summary(out_dir)
    spec = None
    if "alpha_minus" in summary:

        class _S:
            alpha_minus = summary["alpha_minus"]
            alpha_plus = summary["alpha_plus"]

        spec = _S()
    rep = holder_survey(
        f,
        cloud,
        int(cfg.holder.get("n_points", 200)),
        _holder_radii(cfg),
        int(cfg.holder.get("rng_seed", 0)),
        spectrum=spec,
    )
    write_holder_csv(rep, out_dir / "holder.csv")
    summary["holder"] = {"summary": rep.summary, "skipped": rep.skipped, "note": rep.note}
    summary["files"] = summary.get("files", []) + ["holder.csv", "field.grid", "field.png"]
    _save_summary(out_dir, summary)
    s = rep.summary
    print(
        f"holder survey: {s['n_well_fitted']} well-fitted of {s['n_rows']} rows, "
        f"exponents in [{s['min_exponent']:.4f}, {s['max_exponent']:.4f}]"
    )
    return EXIT_OK


def cmd_bound(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    b = cfg.bound
    value = alpha_minus_bound(
        cfg.maps,
        cfg.probabilities,
        int(b.get("n_sequences", 200)),
        int(b.get("seq_len", 60)),
        int(b.get("rng_seed", 0)),
    )
    summary = _load_summary(out_dir)
    entry = {"value": value, "less_than_one": bool(value < 1.0)}
    print(f"alpha_minus bound: {value:.6f} (< 1: {value < 1.0})")
    if "alpha_minus" in summary:
        entry["bound_minus_alpha_minus"] = value - summary["alpha_minus"]
        print(f"bound - alpha_minus_hat = {entry['bound_minus_alpha_minus']:+.6f}")
    summary["bound"] = entry
    _save_summary(out_dir, summary)
    return EXIT_OK


def cmd_all(cfg: RunConfig, out_dir: Path, force: bool) -> int:
    ok, _ = _run_verify(cfg, out_dir)
    if not ok and not force:
        print("condition checks failed; pass --force to run the full pipeline anyway")
        return EXIT_CONDITION
    summary, ft = _spectrum_pipeline(cfg, out_dir)
    if cfg.potential_kind in ("constant", "log_prob"):
        _rigidity_step(cfg, out_dir, summary, ft)
    if cfg.coliseum:
        cmd_hoelder(cfg, out_dir, force)
    else:
        print("no coliseum block configured; skipping field and holder survey")
    cmd_bound(cfg, out_dir, force)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "pressure": cmd_pressure,
    "spectrum": cmd_spectrum,
    "rigidity": cmd_rigidity,
    "coliseum": cmd_coliseum,
    "hoelder": cmd_hoelder,
    "bound": cmd_bound,
    "all": cmd_all,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfsemigroup",
        description="Multifractal analysis of expanding rational semigroups",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to a JSON run configuration")
    parser.add_argument(
        "--force", action="store_true",
        help="run spectra even when the separation/expansion checks fail",
    )
    parser.add_argument(
        "--workers", type=int, default=None,
        help="worker-pool size (results are identical at any worker count; "
        "falls back to MF_SEMIGROUP_WORKERS)",
    )
    parser.add_argument("--out", default=None, help="override the configured output directory")
    args = parser.parse_args(argv)

    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("MF_SEMIGROUP_WORKERS", "1"))
    if workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out if args.out is not None else cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        return COMMANDS[args.command](cfg, out_dir, args.force)
    except (ConfigError, NotPolynomial) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MFSemigroupError as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
