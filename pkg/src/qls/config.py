"""Experiment configuration: one JSON document, validated on load."""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .oscillator_lattice import as_rational

DEFAULT_OUT = "qls_out"


@dataclass(frozen=True)
class GridConfig:
    nx: int = 200
    ny: int = 200
    h: float = 4.0 / 199.0
    origin: tuple[float, float] = (-2.0, -2.0)


@dataclass(frozen=True)
class InitialContour:
    kind: str = "energy"  # "energy" | "circle"
    target: float | None = None
    radius: float | None = None
    center: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class LsmConfig:
    initial: InitialContour = field(default_factory=InitialContour)
    speed: float = 1.0
    t_final: float = 0.3
    checkpoints: tuple[float, ...] = (0.0, 0.3)


@dataclass(frozen=True)
class ProtocolConfig:
    mode: str = "three_step"
    many_to_one: bool = False
    source_angles: tuple[float, ...] | None = None


@dataclass(frozen=True)
class TransitionConfig:
    start: tuple[int, int] = (4, 5)
    target_E: Fraction = Fraction(1)


@dataclass(frozen=True)
class OscillatorConfig:
    omega_x: Fraction = Fraction(1)
    omega_y: Fraction = Fraction(1)
    n_max: int = 10
    include_zero_point: bool = False
    energies: tuple[Fraction, ...] = tuple(Fraction(k) for k in range(1, 10))
    transition: TransitionConfig | None = field(default_factory=TransitionConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    spectrum: tuple[float, ...] = (3.0, 2.0, 1.0)
    contour_targets: tuple[float, ...] = (1.5, 2.0, 2.5)
    sample_count: int = 360
    anchor_angle: float = 0.0
    grid: GridConfig = field(default_factory=GridConfig)
    lsm: LsmConfig = field(default_factory=LsmConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    oscillator: OscillatorConfig = field(default_factory=OscillatorConfig)
    out_dir: str | None = None
    format: str = "csv"

    def output_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get("QLS_OUT") or DEFAULT_OUT)


class _Reader:
    """Pulls typed fields out of parsed JSON, reporting the path and source line on error."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def _line_of(self, path: str) -> int | None:
        leaf = path.split(".")[-1].split("[")[0]
        m = re.search(r'"%s"\s*:' % re.escape(leaf), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else None

    def fail(self, path: str, msg: str):
        line = self._line_of(path)
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: field '{path}': {msg}")

    def number(self, d, key, path, default, positive=False, nonneg=False):
        if key not in d:
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(path, f"expected a finite number, got {v!r}")
        if positive and not v > 0:
            self.fail(path, f"must be > 0, got {v!r}")
        if nonneg and v < 0:
            self.fail(path, f"must be >= 0, got {v!r}")
        return float(v)

    def integer(self, d, key, path, default, minimum=None):
        if key not in d:
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(path, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(path, f"must be >= {minimum}, got {v}")
        return v

    def boolean(self, d, key, path, default):
        if key not in d:
            return default
        v = d[key]
        if not isinstance(v, bool):
            self.fail(path, f"expected true/false, got {v!r}")
        return v

    def rational(self, v, path):
        try:
            r = as_rational(v)
        except (TypeError, ValueError, ZeroDivisionError):
            self.fail(path, f"expected a rational such as 3 or \"3/2\", got {v!r}")
        return r

    def numbers(self, d, key, path, default, min_len=0):
        if key not in d:
            return default
        v = d[key]
        if not isinstance(v, list):
            self.fail(path, "expected a list")
        if len(v) < min_len:
            self.fail(path, f"expected at least {min_len} entries")
        out = []
        for k, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                self.fail(f"{path}[{k}]", f"expected a finite number, got {x!r}")
            out.append(float(x))
        return tuple(out)

    def section(self, d, key, path):
        v = d.get(key, {})
        if v is None:
            return None
        if not isinstance(v, dict):
            self.fail(path, "expected an object")
        return v


_TOP_KEYS = {"spectrum", "contour_targets", "sample_count", "anchor_angle", "grid", "lsm",
             "protocol", "oscillator", "output"}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    r = _Reader(text, source)
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    for k in raw:
        if k not in _TOP_KEYS and k != "schema_version":
            r.fail(k, "unknown field")

    base = ExperimentConfig()
    spectrum = r.numbers(raw, "spectrum", "spectrum", base.spectrum, min_len=2)
    if len(spectrum) != 3:
        r.fail("spectrum", "the (a1, a2) contours need exactly three eigenvalues")
    e1, e2, e3 = spectrum
    if not (e1 > e3 and e2 > e3):
        r.fail("spectrum", "need E_1 > E_3 and E_2 > E_3 (last entry is the minimum)")
    targets = r.numbers(raw, "contour_targets", "contour_targets", base.contour_targets)
    samples = r.integer(raw, "sample_count", "sample_count", base.sample_count, minimum=3)
    anchor = r.number(raw, "anchor_angle", "anchor_angle", base.anchor_angle)

    g = r.section(raw, "grid", "grid") or {}
    gd = GridConfig()
    origin = r.numbers(g, "origin", "grid.origin", gd.origin, min_len=2)
    if len(origin) != 2:
        r.fail("grid.origin", "expected [x, y]")
    grid = GridConfig(
        nx=r.integer(g, "nx", "grid.nx", gd.nx, minimum=3),
        ny=r.integer(g, "ny", "grid.ny", gd.ny, minimum=3),
        h=r.number(g, "h", "grid.h", gd.h, positive=True),
        origin=origin,
    )

    ls = r.section(raw, "lsm", "lsm") or {}
    ini = r.section(ls, "initial", "lsm.initial") or {}
    kind = ini.get("kind", "energy")
    if kind not in ("energy", "circle"):
        r.fail("lsm.initial.kind", f"expected 'energy' or 'circle', got {kind!r}")
    initial = InitialContour(
        kind=kind,
        target=r.number(ini, "target", "lsm.initial.target", None),
        radius=r.number(ini, "radius", "lsm.initial.radius", None, positive=True),
        center=r.numbers(ini, "center", "lsm.initial.center", (0.0, 0.0), min_len=2),
    )
    if kind == "circle" and initial.radius is None:
        r.fail("lsm.initial.radius", "required for a circle")
    if kind == "energy" and initial.target is None and not targets:
        r.fail("lsm.initial.target", "required when contour_targets is empty")
    ld = LsmConfig()
    t_final = r.number(ls, "t_final", "lsm.t_final", ld.t_final, nonneg=True)
    checkpoints = r.numbers(ls, "checkpoints", "lsm.checkpoints", (0.0, t_final))
    for k, c in enumerate(checkpoints):
        if c < 0 or c > t_final:
            r.fail(f"lsm.checkpoints[{k}]", f"must lie in [0, t_final = {t_final}]")
    if list(checkpoints) != sorted(checkpoints):
        r.fail("lsm.checkpoints", "must be sorted")
    lsm = LsmConfig(initial, r.number(ls, "speed", "lsm.speed", ld.speed), t_final, checkpoints)

    pr = r.section(raw, "protocol", "protocol") or {}
    mode = pr.get("mode", "three_step")
    if mode not in ("three_step", "direct"):
        r.fail("protocol.mode", f"expected 'three_step' or 'direct', got {mode!r}")
    angles = r.numbers(pr, "source_angles", "protocol.source_angles", None, min_len=1)
    protocol = ProtocolConfig(mode, r.boolean(pr, "many_to_one", "protocol.many_to_one", False), angles)

    osc = r.section(raw, "oscillator", "oscillator") or {}
    od = OscillatorConfig()
    wx = r.rational(osc.get("omega_x", od.omega_x), "oscillator.omega_x")
    wy = r.rational(osc.get("omega_y", od.omega_y), "oscillator.omega_y")
    for name, w in (("omega_x", wx), ("omega_y", wy)):
        if w <= 0:
            r.fail(f"oscillator.{name}", "must be positive")
    energies = od.energies
    if "energies" in osc:
        if not isinstance(osc["energies"], list):
            r.fail("oscillator.energies", "expected a list")
        energies = tuple(r.rational(e, f"oscillator.energies[{k}]") for k, e in enumerate(osc["energies"]))
    transition = od.transition
    if "transition" in osc:
        tr = osc["transition"]
        if tr is None:
            transition = None
        else:
            if not isinstance(tr, dict):
                r.fail("oscillator.transition", "expected an object or null")
            start = tr.get("from", [4, 5])
            if (not isinstance(start, list) or len(start) != 2
                    or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in start)):
                r.fail("oscillator.transition.from", f"expected [n_x, n_y] of non-negative integers, got {start!r}")
            transition = TransitionConfig(tuple(start),
                                          r.rational(tr.get("target_E", 1), "oscillator.transition.target_E"))
    oscillator = OscillatorConfig(
        wx, wy,
        r.integer(osc, "n_max", "oscillator.n_max", od.n_max, minimum=0),
        r.boolean(osc, "include_zero_point", "oscillator.include_zero_point", od.include_zero_point),
        energies, transition,
    )

    out = r.section(raw, "output", "output") or {}
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        r.fail("output.format", f"expected 'csv' or 'json', got {fmt!r}")
    out_dir = out.get("directory")
    if out_dir is not None and not isinstance(out_dir, str):
        r.fail("output.directory", "expected a path string")

    return ExperimentConfig(spectrum, targets, samples, anchor, grid, lsm, protocol, oscillator, out_dir, fmt)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
