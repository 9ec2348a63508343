"""Command-line driver: constructions, energies, bound comparisons, sweeps and figures.

Configuration is a flat ``key = value`` file (``#`` starts a comment); every key can
also be given as a flag ``--key value``, which overrides the file. Exit codes: 0 on
success, 2 for configuration errors, 3 for numerical failures, 4 for I/O failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import dacmoser
from .cavmap import PiecewiseCavityMap
from .energy import domain_energy, ub_formula
from .errors import ConfigurationError, DomainError, NumericalError
from .lowerbound import distortion_lower_estimate, distortion_rhs, distortion_triple, pro1_bound, thLB_terms
from .raster import RasterSet, fraenkel_search, max_intersection_bruteforce
from .twoball import TwoBallGeometry, solve_geometry

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

COMMANDS = ("construct", "sandwich", "render", "sweep", "distortion", "asymmetry", "transition")

SANDWICH_COLUMNS = (
    "d",
    "delta",
    "v1",
    "v2",
    "eps1",
    "eps2",
    "R",
    "E_lower_pro1",
    "E_interaction_thLB",
    "E_numeric",
    "E_ub_formula",
    "slope_fit",
)

SWEEP_AXES = ("delta", "d", "eps", "ratio")

POLYLINE_POINTS = 512


@dataclass(frozen=True)
class RunConfig:
    d: float = 1.0
    delta: float = 0.0
    v1: Optional[float] = None
    v2: Optional[float] = None
    mu: Optional[float] = None
    ratio: Optional[float] = None
    eps1: float = 1e-3
    eps2: Optional[float] = None
    r: Optional[float] = None
    n_theta: int = 1024
    n_r: int = 32
    transition: bool = False
    c1: float = 1.0
    c2: float = 1.0
    c: float = 1.0
    cn: float = 0.05
    output: Optional[str] = None
    axis: Optional[str] = None
    grid: Optional[tuple] = None
    r1: Optional[float] = None
    r2: Optional[float] = None
    radius_rule: str = "numerics"
    n_s: int = dacmoser.N_S_DEFAULT
    n_t: int = dacmoser.N_T_DEFAULT
    samples: int = 2000
    seed: int = 0
    ball_r: float = 1.5
    ball_r1: float = 1.0
    ball_r2: float = 1.0
    trials: int = 0
    resolution: int = 512

    # derived quantities ------------------------------------------------
    def volumes(self) -> tuple:
        if self.mu is not None or self.ratio is not None:
            if self.v1 is not None or self.v2 is not None:
                raise ConfigurationError("give either v1/v2 or mu/ratio, not both")
            mu = 1.0 if self.mu is None else self.mu
            ratio = 0.3 if self.ratio is None else self.ratio
            if mu < 0 or not 0.0 <= ratio <= 1.0:
                raise ConfigurationError("need mu >= 0 and 0 <= ratio <= 1")
            total = mu * mu * math.pi * self.d * self.d
            return total / (1.0 + ratio), ratio * total / (1.0 + ratio)
        if self.v1 is None and self.v2 is None:
            return replace(self, mu=1.0).volumes()
        v1 = 0.0 if self.v1 is None else self.v1
        v2 = 0.0 if self.v2 is None else self.v2
        return v1, v2

    @property
    def hole2(self) -> float:
        return self.eps1 if self.eps2 is None else self.eps2

    @property
    def outer_radius(self) -> float:
        return 4.0 * self.d if self.r is None else self.r

    def validate(self) -> "RunConfig":
        if not self.d > 0:
            raise ConfigurationError("d must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigurationError("delta must lie in [0, 1]")
        if not (self.eps1 > 0 and self.hole2 > 0):
            raise ConfigurationError("hole radii must be positive")
        if not self.d > self.eps1 + self.hole2:
            raise ConfigurationError("need d > eps1 + eps2")
        v1, v2 = self.volumes()
        if not v1 >= v2 >= 0:
            raise ConfigurationError("need v1 >= v2 >= 0")
        if self.n_theta < 32 or self.n_r < 4:
            raise ConfigurationError("n_theta must be >= 32 and n_r >= 4")
        if self.axis is not None and self.axis not in SWEEP_AXES:
            raise ConfigurationError(f"axis must be one of {', '.join(SWEEP_AXES)}")
        return self


# ---------------------------------------------------------------------------
# config parsing


def _field_types() -> dict:
    hints = {
        "d": float, "delta": float, "v1": float, "v2": float, "mu": float, "ratio": float,
        "eps1": float, "eps2": float, "r": float, "n_theta": int, "n_r": int, "transition": bool,
        "c1": float, "c2": float, "c": float, "cn": float, "output": str, "axis": str, "grid": tuple,
        "r1": float, "r2": float, "radius_rule": str, "n_s": int, "n_t": int, "samples": int,
        "seed": int, "ball_r": float, "ball_r1": float, "ball_r2": float, "trials": int,
        "resolution": int,
    }  # fmt: skip
    assert set(hints) == {f.name for f in fields(RunConfig)}
    return hints


FIELD_TYPES = _field_types()


def _convert(key: str, text: str):
    kind = FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is tuple:
            return tuple(float(x) for x in text.split(",") if x.strip())
        if kind is str:
            return text
        return kind(text)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key!r}: {text!r}") from exc


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELD_TYPES:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, value)
    return values


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    values.update(overrides)
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# shared helpers


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _emit(text: str, output: Optional[str]):
    if output is None:
        sys.stdout.write(text)
        return
    try:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOError(f"cannot write {output}: {exc}") from exc


def _geometry(cfg: RunConfig) -> TwoBallGeometry:
    v1, v2 = cfg.volumes()
    return solve_geometry(cfg.d, cfg.delta, v1, v2)


# ---------------------------------------------------------------------------
# commands


def cmd_construct(cfg: RunConfig) -> str:
    g = _geometry(cfg)
    lines = []
    for f in fields(TwoBallGeometry):
        value = getattr(g, f.name)
        if isinstance(value, tuple):
            value = "(" + ", ".join(_fmt(float(x)) for x in value) + ")"
        lines.append(f"{f.name} = {_fmt(value)}")
    lines.append(f"tangent = {_fmt(g.tangent)}")
    lines.append(f"round_union = {_fmt(g.delta == 1.0)}")
    for key, res in g.residuals().items():
        lines.append(f"residual_{key} = {_fmt(res)}")
    if cfg.transition:
        spec = dacmoser.make_spec(g, cfg.r1, cfg.r2, cfg.radius_rule)
        ok, lhs, rhs = dacmoser.necessary_condition(spec.R1, spec.R2, g.v1, g.v2, g.delta)
        lines += [
            f"transition_R1 = {_fmt(spec.R1)}",
            f"transition_R2 = {_fmt(spec.R2)}",
            f"transition_R3 = {_fmt(spec.R3)}",
            f"necessary_condition = {_fmt(ok)} ({_fmt(lhs)} > {_fmt(rhs)})",
        ]
    return "\n".join(lines) + "\n"


def sandwich_row(cfg: RunConfig) -> list:
    g = _geometry(cfg)
    umap = PiecewiseCavityMap.from_geometry(g)
    eps1, eps2, R = cfg.eps1, cfg.hole2, cfg.outer_radius
    report = domain_energy(umap, eps1, eps2, R, cfg.n_theta, cfg.n_r, subtract_area=True)
    center = umap.piece_outer.origin
    holes = umap.singular_points
    # largest radius for which every ball about a cavitation point stays in B(center, R)
    reach = R - max(abs(a.x - center.x) for a in holes)
    vols = (g.v1, g.v2) if len(holes) == 2 else (g.v1,)
    lower = pro1_bound(vols, (eps1, eps2)[: len(holes)], reach)
    midpoint = 0.5 * (g.a1.x + g.a2.x)
    _, interaction = thLB_terms(g.v1, g.v2, g.d, eps1, eps2, R - abs(midpoint - center.x), cfg.c)
    if g.v1 > 0:
        upper = ub_formula(g.v1, g.v2, g.d, eps1, eps2, R, g.delta, cfg.c1, cfg.c2)
    else:
        upper = 0.0
    slope = report.leading_coefficient if report.leading_coefficient is not None else float("nan")
    return [g.d, g.delta, g.v1, g.v2, eps1, eps2, R, lower, interaction, report.total, upper, slope]


def cmd_sandwich(cfg: RunConfig) -> str:
    return _csv_text(SANDWICH_COLUMNS, [sandwich_row(cfg)])


def _sweep_config(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "delta":
        return replace(cfg, delta=value)
    if axis == "d":
        return replace(cfg, d=value)
    if axis == "eps":
        return replace(cfg, eps1=value, eps2=value)
    v1, v2 = cfg.volumes()
    return replace(cfg, v1=None, v2=None, mu=math.sqrt((v1 + v2) / (math.pi * cfg.d**2)), ratio=value)


def cmd_sweep(cfg: RunConfig) -> str:
    """One sandwich row per grid value plus the least-squares slope across the sweep.

    On the ``eps`` axis the slope is taken against ``log(1/eps)``; on the others
    against the axis value itself.
    """
    axis = cfg.axis or "eps"
    grid = cfg.grid or ()
    header = ("axis", "value") + SANDWICH_COLUMNS + ("sweep_slope",)
    rows = []
    for value in grid:
        rows.append([axis, value] + sandwich_row(_sweep_config(cfg, axis, value).validate()))
    if len(rows) >= 2:
        x = np.array([row[1] for row in rows], dtype=float)
        if axis == "eps":
            x = np.log(1.0 / x)
        y = np.array([row[2 + SANDWICH_COLUMNS.index("E_numeric")] for row in rows])
        slope = float(np.polyfit(x, y, 1)[0])
    else:
        slope = float("nan")
    return _csv_text(header, [row + [slope] for row in rows])


def cmd_distortion(cfg: RunConfig) -> str:
    tri = distortion_triple(cfg.ball_r, cfg.ball_r1, cfg.ball_r2)
    vols = tuple(math.pi * x * x for x in (cfg.ball_r, cfg.ball_r1, cfg.ball_r2))
    header = [
        "R", "R1", "R2", "h", "q1", "q2", "max_intersection", "triple_intersection",
        "lens_lower_bound", "distance_residual", "distortion_lower", "distortion_rhs",
    ]  # fmt: skip
    row = [
        tri.R, tri.R1, tri.R2, tri.h, tri.q1, tri.q2, tri.max_intersection, tri.triple_intersection,
        tri.lens_lower_bound, tri.distance_residual(), distortion_lower_estimate(*vols),
        distortion_rhs(*vols, Cn=cfg.cn),
    ]  # fmt: skip
    if cfg.trials > 0:
        brute = max_intersection_bruteforce(cfg.ball_r, cfg.ball_r1, cfg.ball_r2, cfg.trials, seed=cfg.seed)
        header.append("bruteforce_intersection")
        row.append(brute.best)
    return _csv_text(header, [row])


def _raster_polygon(poly: np.ndarray, resolution: int) -> RasterSet:
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    span = float(np.max(hi - lo))
    pixel = 1.5 * span / resolution
    mid = 0.5 * (lo + hi)
    origin = mid - 0.5 * resolution * pixel
    return RasterSet.polygon(poly, origin, pixel, resolution, resolution)


def cmd_asymmetry(cfg: RunConfig) -> str:
    """Fraenkel asymmetry of each cavity opened by the construction."""
    g = _geometry(cfg)
    umap = PiecewiseCavityMap.from_geometry(g)
    rows = []
    for i, eps in ((1, cfg.eps1), (2, cfg.hole2))[: len(umap.singular_points)]:
        poly = umap.cavity_boundary(i, eps, 4096)
        E = _raster_polygon(poly, cfg.resolution)
        res = fraenkel_search(E)
        rows.append([i, E.area, res.asymmetry, res.center.x, res.center.y, res.radius])
    return _csv_text(("cavity", "area", "asymmetry", "center_x", "center_y", "radius"), rows)


def cmd_transition(cfg: RunConfig) -> str:
    g = _geometry(cfg)
    spec = dacmoser.make_spec(g, cfg.r1, cfg.r2, cfg.radius_rule)
    tmap = dacmoser.solve_transition(spec, cfg.n_s, cfg.n_t)
    ok, lhs, rhs = dacmoser.necessary_condition(spec.R1, spec.R2, g.v1, g.v2, g.delta)
    pts = tmap.sample_points(cfg.samples, cfg.seed)
    det_err = float(np.max(np.abs(tmap.det_fd(pts) - 1.0))) if cfg.samples > 0 else 0.0
    mid = 0.5 * (spec.R1 + spec.R2)
    area = dacmoser.enclosed_area(spec, mid)
    area_err = abs(area / (math.pi * mid * mid + spec.volume) - 1.0)
    header = (
        "delta", "R1", "R2", "R3", "condition", "condition_lhs", "condition_rhs", "identity",
        "mass_residual", "det_error", "area_error", "max_deviation",
    )  # fmt: skip
    row = [g.delta, spec.R1, spec.R2, spec.R3, ok, lhs, rhs, tmap.identity, tmap.mass_residual,
           det_err, area_err, tmap.max_deviation()]  # fmt: skip
    return _csv_text(header, [row])


# ---------------------------------------------------------------------------
# rendering


def _circle(center, radius, m=POLYLINE_POINTS):
    t = np.arange(m) * 2.0 * math.pi / m
    return np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1)


def _ray(center, angle, r0, r1, m=POLYLINE_POINTS):
    r = np.linspace(r0, r1, m)
    return np.stack([center[0] + r * math.cos(angle), center[1] + r * math.sin(angle)], axis=1)


def _reference_curves(cfg: RunConfig, umap: PiecewiseCavityMap, extent: float):
    """Reference polylines ``(points, closed, style)`` about each cavity point and about ``a*``."""
    g = umap.geometry
    curves = []
    holes = [(umap.piece_om1, g.d1, cfg.eps1)]
    if umap.piece_om2 is not None:
        holes.append((umap.piece_om2, g.d2, cfg.hole2))
    for piece, reach, eps in holes:
        for frac in (0.25, 0.5, 0.75, 1.0):
            curves.append((_circle(piece.origin, frac * reach), True, "thin"))
        for k in range(12):
            angle = 2.0 * math.pi * k / 12
            curves.append((_ray(piece.origin, angle, eps, float(piece.shape.q(angle))), False, "thin"))
    outer = umap.piece_outer
    q_max = g.d + abs(outer.origin.x)
    for r in np.linspace(q_max, extent, 5):
        curves.append((_circle(outer.origin, float(r)), True, "thin"))
    for k in range(24):
        angle = 2.0 * math.pi * k / 24
        curves.append((_ray(outer.origin, angle, float(outer.shape.q(angle)), extent), False, "thin"))
    return curves


def _svg_path_points(points, dx) -> str:
    return " ".join("%.5f,%.5f" % (x + dx, -y) for x, y in points)


def render_svg(cfg: RunConfig) -> str:
    """Reference configuration (left) and its image (right) as a standalone SVG."""
    g = _geometry(cfg)
    umap = PiecewiseCavityMap.from_geometry(g)
    mapping = umap
    extent = cfg.outer_radius
    thick = []
    if cfg.transition:
        spec = dacmoser.make_spec(g, cfg.r1, cfg.r2, cfg.radius_rule)
        tmap = dacmoser.solve_transition(spec, cfg.n_s, cfg.n_t)
        mapping = dacmoser.CompositeMap(umap, tmap)
        extent = spec.R2
        thick.append(_circle(spec.center, spec.R1))
    ref = _reference_curves(cfg, umap, extent)
    ref += [(c, True, "thick") for c in thick]
    images = [(mapping.eval(pts), closed, style) for pts, closed, style in ref]
    cavities = [umap.cavity_boundary(1, cfg.eps1, POLYLINE_POINTS)]
    if umap.piece_om2 is not None:
        cavities.append(umap.cavity_boundary(2, cfg.hole2, POLYLINE_POINTS))

    ref_pts = np.concatenate([c for c, _, _ in ref])
    img_pts = np.concatenate([c for c, _, _ in images] + cavities)
    lo_r, hi_r = ref_pts.min(axis=0), ref_pts.max(axis=0)
    lo_i, hi_i = img_pts.min(axis=0), img_pts.max(axis=0)
    span = float(max(np.max(hi_r - lo_r), np.max(hi_i - lo_i)))
    gap = 0.1 * span
    shift = hi_r[0] - lo_i[0] + gap
    lo = np.minimum(lo_r, lo_i + [shift, 0.0]) - 0.05 * span
    hi = np.maximum(hi_r, hi_i + [shift, 0.0]) + 0.05 * span
    width, height = hi - lo
    stroke = span / 600.0

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="%.5f %.5f %.5f %.5f" width="%d" height="%d">'
        % (lo[0], -hi[1], width, height, 1200, int(round(1200 * height / width))),
        '<rect x="%.5f" y="%.5f" width="%.5f" height="%.5f" fill="white"/>' % (lo[0], -hi[1], width, height),
    ]
    for dx, curves in ((0.0, ref), (shift, images)):
        out.append("<g>")
        for pts, closed, style in curves:
            tag = "polygon" if closed else "polyline"
            sw = stroke * (3.0 if style == "thick" else 1.0)
            colour = "#b22222" if style == "thick" else "#1f3b73"
            out.append(
                '<%s points="%s" fill="none" stroke="%s" stroke-width="%.5f"/>'
                % (tag, _svg_path_points(pts, dx), colour, sw)
            )
        out.append("</g>")
    out.append("<g>")
    for poly in cavities:
        out.append(
            '<polygon points="%s" fill="#444444" stroke="black" stroke-width="%.5f"/>'
            % (_svg_path_points(poly, shift), stroke)
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavlab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value configuration file")
    for key in FIELD_TYPES:
        names = ["--" + key]
        if "_" in key:
            names.append("--" + key.replace("_", "-"))
        parser.add_argument(*names, dest=key, default=None, metavar="VALUE")
    return parser


RUNNERS = {
    "construct": cmd_construct,
    "sandwich": cmd_sandwich,
    "render": render_svg,
    "sweep": cmd_sweep,
    "distortion": cmd_distortion,
    "asymmetry": cmd_asymmetry,
    "transition": cmd_transition,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        overrides = {k: _convert(k, v) for k, v in vars(args).items() if k in FIELD_TYPES and v is not None}
        cfg = load_config(args.config, overrides)
        text = RUNNERS[args.command](cfg)
    except (ConfigurationError, DomainError) as exc:
        print(f"cavlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"cavlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        _emit(text, cfg.output)
    except OSError as exc:
        print(f"cavlab: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
