"""Energy ellipses plus both transfer routes between two of them.

Writes contour CSVs, three-step trajectories and direct-map trajectories
under one results directory, then prints a short digest.

    python scripts/fig1_contours.py [--config configs/fig1.json] [--out results/fig1]
"""

import argparse
import json
from pathlib import Path

from qls.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "fig1.json"))
    ap.add_argument("--out", default="results/fig1")
    args = ap.parse_args(argv)
    out = Path(args.out)

    for cmd, sub, extra in [
        ("contours", "contours", []),
        ("protocol", "three_step", ["--mode", "three_step"]),
        ("protocol", "direct", ["--mode", "direct"]),
    ]:
        code = main([cmd, "--config", args.config, "--out", str(out / sub)] + extra)
        if code:
            return code

    s = json.loads((out / "contours" / "contours_summary.json").read_text())
    for e in s["contours"]:
        if "error" in e:
            print(f"<E> = {e['target']}: {e['error']}")
        else:
            A, B = e["semi_axes"]
            print(f"<E> = {e['target']}: A = {A:.6f}, B = {B:.6f}, {e['n_points']} points, "
                  f"{e['dropped_chart_exits']} off-chart samples dropped")
    for mode in ("three_step", "direct"):
        p = json.loads((out / mode / "protocol_summary.json").read_text())
        print(f"{mode}: {p['n_trajectories']} trajectories, max |<E> error| {p['max_final_energy_error']:.2e}, "
              f"{len(p['chart_exits'])} chart exits")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
