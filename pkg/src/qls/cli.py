"""``qls`` command line: reproducible data behind the contour, protocol,
oscillator and level-set demonstrations.

Every command reads one JSON config; flags override config fields. Output
files are written atomically and re-validated before writing.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, with_overrides
from .contour_geometry import (
    MEMBERSHIP_TOL,
    ConicLevelSet,
    contour_point_at,
    dense_polyline,
    energy_contour,
    sample_contour,
)
from .errors import ChartExitError, ConfigError, QLSError, UnreachableTargetError
from .lsm_engine import (
    ConstantSpeed,
    GridSpec,
    classify_grid,
    evolve_steps,
    extract_interface,
    field_to_csv,
    init_from_contour,
    polyline_hausdorff,
)
from .oscillator_lattice import energy_of, level_set_points, plan_transition
from .state_space import Spectrum, expectation_energy
from .unitary_control import Trajectory, direct_map, orthogonality_error, three_step_protocol

log = logging.getLogger("qls")

SCHEMA_VERSION = 1


def fmt(x) -> str:
    return format(float(x), ".17g")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(fmt(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


class Writer:
    """Collects output files under one directory, each written via temp file + rename."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.written: list[str] = []

    def text(self, name: str, content: str):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(content)
            os.replace(tmp, self.out_dir / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(name)

    def json(self, name: str, obj):
        self.text(name, json.dumps(_jsonable(obj), indent=2) + "\n")

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.text(name, buf.getvalue())


class ValidationError(QLSError):
    """An emitted row failed its owning module's invariant."""


# -- contours -------------------------------------------------------------------


def cmd_contours(cfg: ExperimentConfig, out: Writer) -> dict:
    spectrum = Spectrum(np.array(cfg.spectrum))
    entries = []
    for k, target in enumerate(cfg.contour_targets):
        entry = {"index": k, "target": target}
        try:
            c = energy_contour(spectrum, target)
        except QLSError as exc:
            entry["error"] = str(exc)
            entries.append(entry)
            continue
        sample = sample_contour(c, cfg.sample_count)
        rows = []
        for th, p in zip(sample.theta, sample.points):
            res = abs(c.residual(p.a1, p.a2))
            lifted = expectation_energy([p.a1, p.a2, p.a3], spectrum)
            if res >= MEMBERSHIP_TOL or abs(lifted - target) >= MEMBERSHIP_TOL:
                raise ValidationError(f"contour {k}: sample at theta={th} fails membership ({res:.3e})")
            rows.append((th, p.a1, p.a2, p.a3))
        A, B = c.semi_axes
        name = f"contour_{k:02d}.{cfg.format}"
        if cfg.format == "csv":
            out.csv(name, ["theta", "a1", "a2", "a3"], [[fmt(v) for v in r] for r in rows])
        else:
            out.json(name, {"schema_version": SCHEMA_VERSION, "target": target,
                            "columns": ["theta", "a1", "a2", "a3"], "rows": rows})
        entry.update(
            file=name,
            semi_axes=[A, B],
            e_prime=[float(c.quad[0, 0]), float(c.quad[1, 1])],
            n_points=len(sample),
            dropped_chart_exits=sample.dropped,
        )
        entries.append(entry)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "contours",
        "spectrum": list(cfg.spectrum),
        "sample_count": cfg.sample_count,
        "contours": entries,
    }
    out.json("contours_summary.json", summary)
    return summary


# -- protocol -------------------------------------------------------------------


def _trajectory_doc(k, traj, spectrum, target_value, theta):
    compact = traj.compact()
    final = traj.waypoints[-1]
    return {
        "schema_version": SCHEMA_VERSION,
        "index": k,
        "theta": theta,
        "waypoints": [w.coeffs for w in traj.waypoints],
        "maps": [U.matrix for U in traj.maps],
        "hops": traj.labels,
        "hop_residuals": traj.hop_residuals(),
        "effective_hops": compact.labels,
        "final_energy": expectation_energy(final, spectrum),
        "final_energy_error": abs(expectation_energy(final, spectrum) - target_value),
    }


def cmd_protocol(cfg: ExperimentConfig, out: Writer, mode: str | None = None) -> dict:
    mode = mode or cfg.protocol.mode
    if len(cfg.contour_targets) < 2:
        raise ConfigError("protocol needs two contour_targets: source and destination")
    spectrum = Spectrum(np.array(cfg.spectrum))
    t1, t2 = cfg.contour_targets[0], cfg.contour_targets[1]
    c1, c2 = energy_contour(spectrum, t1), energy_contour(spectrum, t2)

    if cfg.protocol.source_angles is not None:
        angles = np.array(cfg.protocol.source_angles, dtype=float)
        sources, thetas = [], []
        for th in angles:
            try:
                sources.append(contour_point_at(c1, th))
                thetas.append(float(th))
            except ChartExitError:
                raise ConfigError(f"protocol.source_angles: theta={th} is outside the chart on the source contour")
    else:
        smp = sample_contour(c1, cfg.sample_count)
        sources, thetas = list(smp.points), [float(t) for t in smp.theta]
    src_states = [p.to_state() for p in sources]

    docs, chart_exits = [], []
    if mode == "three_step":
        try:
            p_o = contour_point_at(c1, cfg.anchor_angle).to_state()
            q_o = contour_point_at(c2, cfg.anchor_angle).to_state()
        except ChartExitError as exc:
            raise ConfigError(f"anchor_angle={cfg.anchor_angle} leaves the chart: {exc}") from None
        if cfg.protocol.many_to_one:
            targets = [q_o] * len(src_states)
        else:
            dest = sample_contour(c2, max(len(src_states), 3))
            valid = [p.to_state() for p in dest.points]
            targets = [valid[k % len(valid)] for k in range(len(src_states))]
        trajs = three_step_protocol(src_states, p_o, q_o, targets, c1, c2)
        for k, (tr, th) in enumerate(zip(trajs, thetas)):
            docs.append(_trajectory_doc(k, tr, spectrum, t2, th))
    elif mode == "direct":
        for k, (p, th) in enumerate(zip(src_states, thetas)):
            try:
                q, U = direct_map(p, c1, c2)
            except ChartExitError as exc:
                chart_exits.append({"index": k, "theta": th, "reason": str(exc)})
                continue
            docs.append(_trajectory_doc(k, Trajectory([p, q], [U], ["direct"]), spectrum, t2, th))
    else:
        raise ConfigError(f"unknown protocol mode {mode!r}")

    max_res = max((max(d["hop_residuals"]) for d in docs), default=0.0)
    max_orth = max((orthogonality_error(U) for d in docs for U in d["maps"]), default=0.0)
    max_err = max((d["final_energy_error"] for d in docs), default=0.0)
    if max_res >= 1e-10 or max_orth >= 1e-12 or max_err >= 1e-9:
        raise ValidationError(
            f"protocol output failed validation (hop {max_res:.3e}, orthogonality {max_orth:.3e}, energy {max_err:.3e})"
        )
    for d in docs:
        out.json(f"trajectory_{d['index']:03d}.json", d)
    if cfg.format == "csv":
        rows = []
        for d in docs:
            for w, wp in enumerate(d["waypoints"]):
                rows.append([d["index"], w] + [fmt(v) for v in wp])
        out.csv("trajectories.csv", ["trajectory", "waypoint", "a1", "a2", "a3"], rows)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "protocol",
        "mode": mode,
        "source_target": t1,
        "destination_target": t2,
        "anchor_angle": cfg.anchor_angle,
        "many_to_one": cfg.protocol.many_to_one,
        "n_trajectories": len(docs),
        "max_final_energy_error": max_err,
        "max_hop_residual": max_res,
        "max_orthogonality_error": max_orth,
        "chart_exits": chart_exits,
    }
    out.json("protocol_summary.json", summary)
    return summary


# -- oscillator -----------------------------------------------------------------


def _plan_doc(plan, start, osc):
    path = plan.path(start)
    return {
        "steps": [
            {"axis": s.axis, "delta_quanta": s.delta, "frequency": str(s.frequency),
             "frequency_label": s.label()}
            for s in plan.steps
        ],
        "path": [list(p) for p in path],
        "energy_change": str(plan.energy_change()),
    }


def cmd_oscillator(cfg: ExperimentConfig, out: Writer) -> dict:
    osc = cfg.oscillator
    rows, sets = [], []
    for set_id, E in enumerate(osc.energies):
        pts = level_set_points(E, osc.omega_x, osc.omega_y, osc.n_max, osc.include_zero_point)
        for p in pts:
            if energy_of(p, osc.omega_x, osc.omega_y, osc.include_zero_point) != E:
                raise ValidationError(f"lattice point {tuple(p)} is not on level E = {E}")
            rows.append((p.n_x, p.n_y, E.numerator, E.denominator, set_id))
        sets.append({"set_id": set_id, "E": str(E), "degeneracy": len(pts)})
    if cfg.format == "csv":
        out.csv("lattice.csv", ["n_x", "n_y", "E_num", "E_den", "set_id"], rows)
    else:
        out.json("lattice.json", {"schema_version": SCHEMA_VERSION,
                                  "columns": ["n_x", "n_y", "E_num", "E_den", "set_id"], "rows": rows})

    plan_doc = None
    if osc.transition is not None:
        tr = osc.transition
        plan_doc = {
            "schema_version": SCHEMA_VERSION,
            "from": list(tr.start),
            "target_E": str(tr.target_E),
            "omega": [str(osc.omega_x), str(osc.omega_y)],
            "include_zero_point": osc.include_zero_point,
        }
        try:
            plans = plan_transition(tr.start, tr.target_E, osc.omega_x, osc.omega_y, osc.include_zero_point)
            for plan in plans:
                end = plan.path(tr.start)[-1]
                if energy_of(end, osc.omega_x, osc.omega_y, osc.include_zero_point) != tr.target_E:
                    raise ValidationError("plan does not land on the target level set")
            plan_doc["plans"] = [_plan_doc(p, tr.start, osc) for p in plans]
        except UnreachableTargetError as exc:
            plan_doc["error"] = str(exc)
            plan_doc["constraint_trace"] = exc.trace
        out.json("plan.json", plan_doc)

    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "oscillator",
        "omega": [str(osc.omega_x), str(osc.omega_y)],
        "n_max": osc.n_max,
        "include_zero_point": osc.include_zero_point,
        "level_sets": sets,
        "n_rows": len(rows),
        "plan_error": plan_doc.get("error") if plan_doc else None,
    }
    out.json("oscillator_summary.json", summary)
    return summary


# -- lsm demo ---------------------------------------------------------------------


def _initial_contour(cfg: ExperimentConfig):
    ini = cfg.lsm.initial
    if ini.kind == "circle":
        r = ini.radius
        return ConicLevelSet.diagonal(1 / r**2, 1 / r**2), tuple(ini.center), r
    target = ini.target if ini.target is not None else cfg.contour_targets[0]
    return energy_contour(Spectrum(np.array(cfg.spectrum)), target), (0.0, 0.0), None


def _polyline_rows(polys):
    rows = []
    for k, p in enumerate(polys):
        for v, (x, y) in enumerate(p.points):
            rows.append([k, v, fmt(x), fmt(y), int(p.closed)])
    return rows


def cmd_lsm_demo(cfg: ExperimentConfig, out: Writer) -> dict:
    g = cfg.grid
    grid = GridSpec(g.nx, g.ny, g.h, g.origin)
    conic, center, radius = _initial_contour(cfg)
    field0 = init_from_contour(conic, grid, center)

    polys0 = extract_interface(field0)
    ref = dense_polyline(conic) + np.array(center)
    roundtrip = max((polyline_hausdorff(p.points, ref, p.closed, True) for p in polys0), default=float("inf"))

    checkpoints = list(cfg.lsm.checkpoints)
    snapshots = []
    if checkpoints and checkpoints[0] == 0.0:
        snapshots.append((0.0, field0))
    pending = [t for t in checkpoints if t > 0.0]
    current = field0
    # evolve from checkpoint to checkpoint so each lands exactly on its time
    t_prev = 0.0
    for t in pending:
        for _, current in evolve_steps(current, ConstantSpeed(cfg.lsm.speed), t - t_prev):
            pass
        t_prev = t
        snapshots.append((t, current))

    entries = []
    for k, (t, f) in enumerate(snapshots):
        polys = extract_interface(f)
        part = classify_grid(f)
        out.text(f"field_{k:02d}.csv", field_to_csv(f))
        out.csv(f"interface_{k:02d}.csv", ["polyline", "vertex", "x", "y", "closed"], _polyline_rows(polys))
        out.text(f"partition_{k:02d}.csv", field_to_csv(f.with_values(part.labels.astype(float))))
        entry = {
            "index": k,
            "time": t,
            "n_polylines": len(polys),
            "n_interface_nodes": int(part.interface.sum()),
            "n_inside_nodes": int(part.inside.sum()),
            "n_outside_nodes": int(part.outside.sum()),
        }
        if radius is not None and polys:
            pts = np.concatenate([p.points for p in polys]) - np.array(center)
            r = np.linalg.norm(pts, axis=1)
            expected = radius + cfg.lsm.speed * t
            entry.update(mean_radius=float(r.mean()), expected_radius=expected,
                         radius_error=float(abs(r.mean() - expected)),
                         max_radius_deviation=float(np.abs(r - expected).max()))
        entries.append(entry)

    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "lsm-demo",
        "grid": {"nx": grid.nx, "ny": grid.ny, "h": grid.h, "origin": list(grid.origin)},
        "initial": {"kind": cfg.lsm.initial.kind, "quad": conic.quad, "center": list(center)},
        "speed": cfg.lsm.speed,
        "roundtrip_hausdorff": roundtrip,
        "roundtrip_bound_2h": 2 * grid.h,
        "checkpoints": entries,
    }
    out.json("lsm_summary.json", summary)
    return summary


# -- entry point -------------------------------------------------------------------


COMMANDS = {
    "contours": cmd_contours,
    "protocol": cmd_protocol,
    "oscillator": cmd_oscillator,
    "lsm-demo": cmd_lsm_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qls {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config (JSON); defaults apply when omitted")
        p.add_argument("--out", help="output directory (default: config, then $QLS_OUT, then ./qls_out)")
        p.add_argument("--format", choices=["csv", "json"], help="tabular output format")
        p.add_argument("--samples", type=int, help="override sample_count")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "protocol":
            p.add_argument("--mode", choices=["three_step", "direct"])
            p.add_argument("--anchor-angle", type=float)
        if name == "lsm-demo":
            p.add_argument("--speed", type=float)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.samples is not None and args.samples < 3:
            raise ConfigError("--samples must be >= 3")
        cfg = with_overrides(cfg, out_dir=args.out, format=args.format, sample_count=args.samples,
                             anchor_angle=getattr(args, "anchor_angle", None))
        if getattr(args, "speed", None) is not None:
            cfg = replace(cfg, lsm=replace(cfg.lsm, speed=args.speed))
        out = Writer(cfg.output_dir())
        fn = COMMANDS[args.command]
        if args.command == "protocol":
            summary = fn(cfg, out, getattr(args, "mode", None))
        else:
            summary = fn(cfg, out)
    except ConfigError as exc:
        print(f"qls: config error: {exc}", file=sys.stderr)
        return 2
    except QLSError as exc:
        print(f"qls: error: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %d files to %s", len(out.written), out.out_dir)
    for name in out.written:
        log.info("  %s", name)
    soft = [e for e in summary.get("contours", []) if "error" in e]
    for e in soft:
        print(f"qls: warning: contour {e['index']} (target {e['target']}): {e['error']}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
