"""Grid-convergence studies for the level-set engine and the <theta> contours.

1. Circle r0 = 0.5 grown at F = 1 to t = 0.3 over [-2, 2]^2: radius error vs n.
2. Reinitialisation of phi = 2 d for the unit circle: |grad phi| range and
   deviation from the exact distance vs n.
3. Diagonal <theta> contours against the analytic ellipse vs resolution.

    python scripts/lsm_convergence.py [--sizes 50 100 200 400]
"""

import argparse
import time

import numpy as np

from qls.contour_geometry import ConicLevelSet, signed_distance_to_contour, theta_contour
from qls.lsm_engine import (
    ConstantSpeed,
    GridSpec,
    ScalarGridField,
    evolve,
    extract_interface,
    init_from_contour,
    reinitialize,
)
from qls.state_space import ObservableMatrix


def circle_growth(sizes):
    print("circle growth: n, h, radius error, error / h, ratio, seconds")
    prev = None
    for n in sizes:
        g = GridSpec.square(n, -2.0, 2.0)
        t0 = time.perf_counter()
        f = evolve(init_from_contour(ConicLevelSet.diagonal(4.0, 4.0), g), ConstantSpeed(1.0), 0.3)
        pts = np.concatenate([p.points for p in extract_interface(f)])
        err = abs(np.linalg.norm(pts, axis=1).mean() - 0.8)
        dt = time.perf_counter() - t0
        ratio = f"{prev / err:5.2f}" if prev else "  -  "
        print(f"  {n:4d}  {g.h:.5f}  {err:.3e}  {err / g.h:.3f}  {ratio}  {dt:.2f}")
        prev = err


def reinit_study(sizes):
    print("reinitialisation of 2 d: n, grad range away from band/centre, max |phi - d|, band max |phi - d|")
    for n in sizes:
        g = GridSpec.square(n, -2.0, 2.0)
        d = ScalarGridField.from_function(g, lambda x, y: np.hypot(x, y) - 1.0)
        r = reinitialize(d.with_values(2 * d.values))
        gx, gy = np.gradient(r.values, g.h)
        gn = np.hypot(gx, gy)
        X, Y = g.mesh()
        far = (np.abs(d.values) > 2 * g.h) & (np.hypot(X, Y) > 2 * g.h)
        far[[0, -1], :] = far[:, [0, -1]] = False
        band = np.abs(d.values) < g.h
        dev = np.abs(r.values - d.values)
        print(f"  {n:4d}  [{gn[far].min():.3f}, {gn[far].max():.3f}]  {dev.max():.3e}  {dev[band].max():.3e}")


def theta_study(resolutions):
    print("diagonal <theta> contour vs ellipse: resolution, max deviation, ratio")
    c = ConicLevelSet.diagonal(2.0, 1.0)
    obs = ObservableMatrix(np.diag([3.0, 2.0, 1.0]))
    prev = None
    for res in resolutions:
        pts = np.concatenate([p.points for p in theta_contour(obs, 2.0, res)])
        dev = float(np.abs(signed_distance_to_contour(c, pts)).max())
        ratio = f"{prev / dev:5.2f}" if prev else "  -  "
        print(f"  {res:4d}  {dev:.3e}  {ratio}")
        prev = dev


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    args = ap.parse_args(argv)
    circle_growth(args.sizes)
    reinit_study([s + 1 for s in args.sizes[:3]])
    theta_study([16, 32, 64, 128, 256, 512])
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
