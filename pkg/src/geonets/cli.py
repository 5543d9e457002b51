"""Experiment CLI: config ingestion, command dispatch, report emission.

Subcommands: ``shorten``, ``minmax``, ``verify-t1q2``, ``verify-pi1``,
``gradcheck``.  A run reads one JSON config file (schema below, unknown keys
rejected), executes with a seeded deterministic random source and writes
``report.json`` plus, depending on the command, ``trace.csv``, ``net.json``
and ``net.svg`` into the output directory.  Identical config + seed gives
byte-identical outputs except the wall-time field.

Config schema (version 1)::

    {
      "schema_version": 1,
      "command": "verify-t1q2",            # optional; subcommand wins
      "seed": 0,
      "manifold": {"kind": "round_sphere", "radius": 1.0,
                   "inj": null, "diam": null, ...},
      "tolerances": {"eps_stationary": null, "eps_collapse": null,
                     "merge_tol": null, "tol_bound": null},
      "family": {"members": 33, "rounds": 20, "slices": 65,
                 "segments": null},
      "cycle": {"kind": "torus_wrap", "winding": [1, 0], "noise": 0.05,
                "segments": null, "z_frac": 0.0, "k": 1, "n_vertices": 5},
      "gradcheck": {"samples": 24, "h": 1e-5},
      "output": {"dir": "out", "svg": false}
    }
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cycles import (
    GeodesicNet,
    PolygonalCycle,
    latitude_circle_cycle,
    net_to_json,
    project_to_net,
    random_loop_cycle,
    torus_wrap_cycle,
)
from .errors import GeonetsError, ShortenDidNotConverge
from .manifolds import Manifold, make_manifold
from .shortening import (
    FlowConfig,
    deformation_vector,
    first_variation,
    shorten,
    trace_to_csv,
)
from .sweepout import (
    CycleFamily,
    latitude_sweepout,
    minmax,
    verify_nonsimply_connected,
    verify_theorem1_q2,
)

SCHEMA_VERSION = 1

_SCHEMA = {
    "schema_version": None,
    "command": None,
    "seed": None,
    "manifold": {"kind": None, "radius": None, "a": None, "b": None, "c": None,
                 "basis": None, "major": None, "minor": None,
                 "coefficients": None, "inj": None, "diam": None},
    "tolerances": {"eps_stationary": None, "eps_collapse": None,
                   "merge_tol": None, "tol_bound": None},
    "family": {"members": None, "rounds": None, "slices": None,
               "segments": None},
    "cycle": {"kind": None, "winding": None, "noise": None, "segments": None,
              "z_frac": None, "k": None, "n_vertices": None},
    "gradcheck": {"samples": None, "h": None},
    "output": {"dir": None, "svg": None},
}


class ConfigError(GeonetsError):
    pass


def _check_keys(obj: dict, schema: dict, path: str = "config"):
    for key, val in obj.items():
        if key not in schema:
            raise ConfigError(f"unknown key {path}.{key} (known: {sorted(schema)})")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path}.{key} must be an object")
            _check_keys(val, sub, f"{path}.{key}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(cfg, _SCHEMA)
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    if "manifold" not in cfg or "kind" not in cfg["manifold"]:
        raise ConfigError("config needs manifold.kind")
    return cfg


def _manifold_from_config(cfg: dict) -> Manifold:
    spec = dict(cfg["manifold"])
    kind = spec.pop("kind")
    spec = {k: v for k, v in spec.items() if v is not None}
    if "basis" in spec:
        spec["basis"] = tuple(tuple(row) for row in spec["basis"])
    try:
        return make_manifold(kind, **spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad manifold spec: {exc}") from exc


def _flow_config(cfg: dict) -> FlowConfig:
    tol = cfg.get("tolerances", {}) or {}
    return FlowConfig(
        eps_stationary=tol.get("eps_stationary"),
        eps_collapse=tol.get("eps_collapse"),
        merge_tol=tol.get("merge_tol"),
    )


def _build_cycle_from_config(m: Manifold, cfg: dict, rng: np.random.Generator) -> PolygonalCycle:
    spec = dict(cfg.get("cycle") or {})
    kind = spec.get("kind", "random_loop")
    segments = spec.get("segments")
    noise = spec.get("noise") or 0.0
    if kind == "torus_wrap":
        from .shortening import choose_N

        winding = tuple(spec.get("winding") or (1, 0))
        wrap_len = float(np.linalg.norm(m.basis @ np.asarray(winding, dtype=float)))
        n = segments or choose_N(1.6 * wrap_len, m.inj)
        return torus_wrap_cycle(m, winding, n, noise=noise, rng=rng)
    if kind == "latitude_circle":
        n = segments or 16
        return latitude_circle_cycle(m, spec.get("z_frac") or 0.0, n,
                                     noise=noise, rng=rng)
    if kind == "random_loop":
        return random_loop_cycle(m, rng, k=spec.get("k") or 1,
                                 n_vertices=spec.get("n_vertices") or 5)
    raise ConfigError(f"unknown cycle kind {kind!r}")


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def _bound_row(name: str, formula: str, bound: float, measured: float,
               tol: float) -> dict:
    return {
        "name": name,
        "bound_formula": formula,
        "bound_value": bound,
        "measured": measured,
        "tolerance": tol,
        "passed": bool(measured <= bound + tol),
    }


def _outcome_json(outcome) -> dict:
    return {
        "status": outcome.status,
        "net": net_to_json(outcome.net) if outcome.net is not None else None,
        "iterations": len(outcome.trace),
        "final_length": outcome.trace[-1].length if outcome.trace else None,
    }


def _minmax_json(report) -> dict:
    return {
        "width_estimate": report.width_estimate,
        "achiever": report.achiever,
        "rounds_run": len(report.round_max_lengths) - 1,
        "round_max_lengths": report.round_max_lengths,
        "certificate_mass": report.certificate_mass,
        "certificate_residual": report.certificate_residual,
        "stationary_candidate": (
            _outcome_json(report.stationary_candidate)
            if report.stationary_candidate is not None else None
        ),
    }


def run(config: dict, out_dir: Path | None = None) -> dict:
    """Execute the configured command; returns the report dict."""
    command = config.get("command")
    if command is None:
        raise ConfigError("no command given (config.command or subcommand)")
    seed = int(config.get("seed", 0))
    rng = np.random.default_rng(seed)
    m = _manifold_from_config(config)
    fcfg = _flow_config(config)
    tol = config.get("tolerances", {}) or {}
    fam_cfg = config.get("family", {}) or {}
    t0 = time.perf_counter()

    report = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "manifold": {"kind": m.kind, "inj": m.inj, "diam": m.diam},
        "bound_table": [],
        "outcome": None,
    }
    trace_rows = None
    net: GeodesicNet | None = None
    family: CycleFamily | None = None
    exit_code = 0

    if command == "shorten":
        cycle = _build_cycle_from_config(m, config, rng)
        try:
            outcome = shorten(cycle, fcfg)
        except ShortenDidNotConverge as exc:
            report["outcome"] = {"status": "nonconverged",
                                 "iterations": len(exc.trace)}
            trace_rows = exc.trace
            exit_code = 4
        else:
            report["outcome"] = _outcome_json(outcome)
            trace_rows = outcome.trace
            net = outcome.net
    elif command == "minmax":
        slices = fam_cfg.get("slices") or 33
        family = latitude_sweepout(m, slices, segments=fam_cfg.get("segments"))
        mm = minmax(family, fcfg, rounds=fam_cfg.get("rounds") or 20)
        report["outcome"] = _minmax_json(mm)
        if mm.stationary_candidate is not None:
            trace_rows = mm.stationary_candidate.trace
            net = mm.stationary_candidate.net
    elif command == "verify-t1q2":
        mm = verify_theorem1_q2(
            m, cfg=fcfg, seed=seed,
            members=fam_cfg.get("members") or 33,
            rounds=fam_cfg.get("rounds") or 20,
            segments=fam_cfg.get("segments"),
            tol_bound=tol.get("tol_bound"),
        )
        report["outcome"] = _minmax_json(mm)
        tb = tol.get("tol_bound") if tol.get("tol_bound") is not None else 1e-2 * m.diam
        measured = mm.certificate_mass if mm.certificate_mass is not None \
            else mm.width_estimate
        report["bound_table"].append(
            _bound_row("theorem1_q2", "4d", 4.0 * m.diam, measured, tb))
        if mm.stationary_candidate is not None:
            trace_rows = mm.stationary_candidate.trace
            net = mm.stationary_candidate.net
        if not mm.bound_checked[2] or mm.certificate_mass is None:
            exit_code = 3
    elif command == "verify-pi1":
        cyc_cfg = config.get("cycle") or {}
        mm = verify_nonsimply_connected(
            m, cfg=fcfg, seed=seed,
            segments=(cyc_cfg.get("segments") or fam_cfg.get("segments")),
            noise=cyc_cfg.get("noise") or 0.0,
            tol_bound=tol.get("tol_bound"),
        )
        report["outcome"] = _minmax_json(mm)
        tb = tol.get("tol_bound") if tol.get("tol_bound") is not None else 1e-2 * m.diam
        measured = mm.certificate_mass if mm.certificate_mass is not None \
            else float("inf")
        report["bound_table"].append(
            _bound_row("pi1_remark", "2d", 2.0 * m.diam, measured, tb))
        if mm.stationary_candidate is not None:
            trace_rows = mm.stationary_candidate.trace
            net = mm.stationary_candidate.net
        if not mm.bound_checked[2]:
            exit_code = 3
    elif command == "gradcheck":
        gc_cfg = config.get("gradcheck", {}) or {}
        result = gradcheck(m, rng, samples=gc_cfg.get("samples") or 24,
                           h=gc_cfg.get("h") or 1e-5)
        report["outcome"] = result
        if not result["passed"]:
            exit_code = 3
    else:
        raise ConfigError(f"unknown command {command!r}")

    report["wall_time_s"] = time.perf_counter() - t0
    report["exit_code"] = exit_code

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(canonical_json(report))
        if trace_rows is not None:
            (out_dir / "trace.csv").write_text(trace_to_csv(trace_rows))
        if net is not None:
            (out_dir / "net.json").write_text(canonical_json(net_to_json(net)))
        if (config.get("output") or {}).get("svg"):
            target = net if net is not None else family
            if target is not None:
                (out_dir / "net.svg").write_text(render_svg(target))
    return report


def gradcheck(m: Manifold, rng: np.random.Generator, samples: int = 24,
              h: float = 1e-5) -> dict:
    """First-variation identity and finite-difference check on random cycles."""
    from .cycles import _assemble

    worst_identity = 0.0
    worst_fd = 0.0
    for _ in range(samples):
        k = int(rng.integers(1, 3))
        c = random_loop_cycle(m, rng, k=k, n_vertices=int(rng.integers(3, 6)))
        v = deformation_vector(c)
        fv = first_variation(c, v)
        if v.norm_sq > 1e-12:
            worst_identity = max(worst_identity,
                                 abs(fv + v.norm_sq) / v.norm_sq)

        def displaced_length(s: float) -> float:
            mp = c.mp.copy()
            move = np.linalg.norm(v.block_comp, axis=1) > 0
            if np.any(move):
                P1, _ = m.shoot_batch(c.mp[move], v.block_comp[move], s)
                mp[move] = m.wrap_points(P1)
            flat = c.interior.reshape(-1, c.mp.shape[1]).copy()
            dirs = v.interior_comp.reshape(-1, c.mp.shape[1])
            move = np.linalg.norm(dirs, axis=1) > 0
            if np.any(move):
                P1, _ = m.shoot_batch(flat[move], dirs[move], s)
                flat[move] = m.wrap_points(P1)
            cc = _assemble(m, c.ctype, mp, flat.reshape(c.interior.shape),
                           keep_mask=True)
            return cc.length()

        fd = (displaced_length(h) - displaced_length(-h)) / (2.0 * h)
        scale = max(abs(fv), 1e-9)
        worst_fd = max(worst_fd, abs(fd - fv) / scale)
    return {
        "samples": samples,
        "h": h,
        "max_identity_rel_err": worst_identity,
        "max_fd_rel_err": worst_fd,
        "passed": bool(worst_identity <= 1e-6 and worst_fd <= 1e-4),
    }


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, plain floats, trailing newline."""

    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        if isinstance(x, np.ndarray):
            return [clean(v) for v in x.tolist()]
        if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
            return repr(x)
        return x

    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def render_svg(net_or_family, projection: str | None = None,
               size: int = 480) -> str:
    """Deterministic SVG of a net or a family snapshot set.

    Orthographic projection (drop the z coordinate) for embedded manifolds,
    chart plane for tori; vertex markers are sized by degree.
    """
    if isinstance(net_or_family, GeodesicNet):
        m = net_or_family.manifold
        polylines = [e.polyline for e in net_or_family.edges]
        vertices = net_or_family.vertices
        degrees = net_or_family.degrees() if len(net_or_family.vertices) else []
    else:
        m = net_or_family.manifold
        polylines = []
        step = max(1, len(net_or_family.members) // 8)
        for member in net_or_family.members[::step]:
            for row in member.segments(n_samples=8):
                for seg in row:
                    polylines.append(np.array([p.coords for p in seg.samples]))
        vertices = np.zeros((0, m.ambient_dim))
        degrees = []
    if projection is None:
        projection = "chart_plane" if m.chart else "orthographic"

    def project(pts: np.ndarray) -> np.ndarray:
        if pts.shape[1] >= 3 and projection == "orthographic":
            return pts[:, :2]
        return pts[:, :2]

    flat = [project(np.atleast_2d(p)) for p in polylines if len(p)]
    allpts = np.concatenate(flat, axis=0) if flat else np.zeros((1, 2))
    lo = allpts.min(axis=0) - 0.1
    hi = allpts.max(axis=0) + 0.1
    span = float(max(hi - lo)) or 1.0

    def to_px(p):
        x = (p[0] - lo[0]) / span * (size - 20) + 10
        y = size - ((p[1] - lo[1]) / span * (size - 20) + 10)
        return x, y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for poly in flat:
        coords = " ".join("%.3f,%.3f" % to_px(p) for p in poly)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="black" stroke-width="1.2"/>'
        )
    for vi, vert in enumerate(np.atleast_2d(vertices)):
        if len(degrees) <= vi:
            break
        x, y = to_px(project(vert[None])[0])
        r = 2.0 + 0.8 * degrees[vi]
        parts.append(f'<circle cx="%.3f" cy="%.3f" r="%.2f" fill="crimson"/>' % (x, y, r))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="geonets",
        description="Stationary 1-cycles on explicit Riemannian surfaces",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in ("shorten", "minmax", "verify-t1q2", "verify-pi1", "gradcheck"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--svg", action="store_true", help="emit net.svg")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    config["command"] = args.subcommand
    if args.seed is not None:
        config["seed"] = args.seed
    if args.svg:
        config.setdefault("output", {})
        config["output"]["svg"] = True

    try:
        report = run(config, out_dir=Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ShortenDidNotConverge as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 4
    except GeonetsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4

    for row in report["bound_table"]:
        status = "PASS" if row["passed"] else "FAIL"
        print(f"[{status}] {row['name']}: measured {row['measured']:.6g} "
              f"<= {row['bound_formula']} = {row['bound_value']:.6g} "
              f"(+{row['tolerance']:.2g})")
    outcome = report.get("outcome") or {}
    if isinstance(outcome, dict) and "status" in outcome:
        print(f"outcome: {outcome['status']}")
    print(f"report written to {Path(args.out) / 'report.json'}")
    return report.get("exit_code", 0)


if __name__ == "__main__":
    sys.exit(main())
