"""Dyadic scaling experiments for the spherical maximal operator.

Each family builds a test function ``f_j`` at frequency scale ``2^j``, applies the
operator, and regresses ``log2(||out|| / ||f_j||)`` against ``j``.  The fitted
slope is compared with the exponent predicted by :mod:`sphmax.exponents`.

* ``focusing``: chirped annular bump, fixed time ``t = 1``, measured near the origin.
* ``plate``: frequency plate around ``(2^j, 0, ...)``, sup over ``t``, measured on a slab.
* ``cone``: annular bump cut to a frequency sector, sup over ``t``, measured on a spatial sector.
* ``smoothing``: half-wave propagator, space-time ``L^q`` over ``t in [1, 2]`` against ``L^p``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exponents import ExponentPoint, format_fraction, sigma_terms, smoothing_order
from .field import (
    FREQUENCY,
    GridField,
    GridSpec,
    ResolutionError,
    _inverse,
    lebesgue_norm,
    lp_norm_of_modulus,
    make_mask,
)
from .operators import (
    CutoffSpec,
    RadialMultiplier,
    _scatter,
    _support,
    apply_multiplier,
    check_resolvable,
    cutoff,
    dyadic_t_grid,
    maximal_over_t,
)
from .specfun import ComplexOrder

FAMILIES = ("focusing", "plate", "cone", "smoothing")
SMOOTHING_INPUTS = ("bump", "focusing", "random")
MAX_POINTS = {2: 2048, 3: 256}
DEFAULT_BOX = {"focusing": 3.5, "plate": 8.0, "cone": 6.0, "smoothing": 6.0}
DEFAULT_J_RANGE = {"focusing": (3, 7), "plate": (3, 7), "cone": (3, 6), "smoothing": (2, 5)}
DEFAULT_OVERSAMPLING = {"focusing": 1.0, "plate": 4.0, "cone": 1.0, "smoothing": 1.0}
DEFAULT_TOLERANCE = {"focusing": 0.15, "plate": 0.15, "cone": 0.2, "smoothing": 0.2}


def parse_exponent(value) -> Fraction:
    """Reciprocal ``1/p`` of a Lebesgue exponent given as ``2``, ``"3/2"``, ``"inf"``."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "infinity", "∞"):
            return Fraction(0)
        value = Fraction(v)
    p = Fraction(value)
    if p < 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {value}")
    return 1 / p


def exponent_text(inv: Fraction) -> str:
    if inv == 0:
        return "inf"
    p = 1 / inv
    return str(p.numerator) if p.denominator == 1 else format_fraction(p)


def _as_float_exponent(inv: Fraction) -> float:
    return math.inf if inv == 0 else float(1 / inv)


@dataclass
class ExperimentConfig:
    family: str
    dim: int = 2
    alpha: ComplexOrder = dc_field(default_factory=lambda: ComplexOrder(0.0, 0.0))
    p: str = "2"
    q: str = "2"
    j_range: Optional[Tuple[int, int]] = None
    delta: float = 0.25
    epsilon: float = 0.25
    box_length: Optional[float] = None
    oversampling: Optional[float] = None
    grid_refine: int = 1
    t_refine: int = 1
    max_points: Optional[int] = None
    plateau: Tuple[float, float] = (1.0, 2.0)
    support: Tuple[float, float] = (0.5, 2.25)
    aperture_inner: float = 0.35
    aperture_outer: float = 0.5
    mask_width: float = 0.25
    smoothing_input: str = "bump"
    seed: int = 0
    window: int = 3
    tolerance: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.dim not in MAX_POINTS:
            raise ValueError("experiments run in dimension 2 or 3")
        self.alpha = ComplexOrder.coerce(self.alpha)
        if self.j_range is None:
            self.j_range = DEFAULT_J_RANGE[self.family]
        if self.oversampling is None:
            self.oversampling = DEFAULT_OVERSAMPLING[self.family]
        self.j_range = (int(self.j_range[0]), int(self.j_range[1]))
        self.plateau = tuple(float(x) for x in self.plateau)
        self.support = tuple(float(x) for x in self.support)
        if self.j_range[1] < self.j_range[0] or self.j_range[0] < 0:
            raise ValueError("j_range must be an increasing pair of nonnegative integers")
        point = self.point  # validates p, q
        if point.inv_q > point.inv_p:
            raise ValueError("need q >= p")
        if self.window < 2 or self.window > len(self.js):
            raise ValueError("slope window must cover between 2 and all scales")
        if self.smoothing_input not in SMOOTHING_INPUTS:
            raise ValueError(f"smoothing_input must be one of {SMOOTHING_INPUTS}")
        if self.box_length is None:
            self.box_length = DEFAULT_BOX[self.family]
        if self.max_points is None:
            self.max_points = MAX_POINTS[self.dim]
        if self.tolerance is None:
            self.tolerance = DEFAULT_TOLERANCE[self.family]
        for name in ("delta", "epsilon", "box_length", "oversampling", "mask_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_refine < 1 or self.t_refine < 1:
            raise ValueError("refinement factors must be >= 1")

    @property
    def js(self) -> List[int]:
        return list(range(self.j_range[0], self.j_range[1] + 1))

    @property
    def point(self) -> ExponentPoint:
        return ExponentPoint(parse_exponent(self.p), parse_exponent(self.q), self.dim)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = str(self.alpha)
        d["j_range"] = list(self.j_range)
        d["plateau"] = list(self.plateau)
        d["support"] = list(self.support)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if "alpha" in d and isinstance(d["alpha"], str):
            d["alpha"] = ComplexOrder.parse(d["alpha"])
        for key in ("p", "q"):
            if key in d:
                d[key] = str(d[key])
        return cls(**d)

    # -- per-scale construction --------------------------------------------------

    def cutoff_spec(self, j: int) -> CutoffSpec:
        if self.family == "plate":
            return CutoffSpec("plate", j=j, delta=self.delta)
        if self.family == "cone":
            return CutoffSpec("cone_sector", j=j, plateau=self.plateau, support=self.support,
                              aperture_inner=self.aperture_inner, aperture_outer=self.aperture_outer)
        if self.family == "smoothing":
            return CutoffSpec("annulus", j=j, plateau=(0.75, 1.5), support=(0.5, 2.0))
        return CutoffSpec("annulus", j=j, plateau=self.plateau, support=self.support)

    def carrier(self, j: int) -> Tuple[float, ...]:
        """Lattice frequency at the centre of the input spectrum's bounding box."""
        if self.family not in ("plate", "cone"):
            return (0.0,) * self.dim
        lo, hi = self.cutoff_spec(j).bounding_box(self.dim)
        L = self.box_length
        return tuple(float(round(c * L) / L) for c in (lo + hi) / 2)

    def grid(self, j: int) -> GridSpec:
        """Smallest power-of-two grid resolving scale ``j``; raises if above ``max_points``."""
        lo, hi = self.cutoff_spec(j).bounding_box(self.dim)
        kappa = np.asarray(self.carrier(j))
        reach = float(np.maximum(np.abs(lo - kappa), np.abs(hi - kappa)).max())
        need = 2.0 * reach * self.oversampling * self.box_length
        N = 4
        while N <= need:
            N *= 2
        N *= self.grid_refine
        if N > self.max_points:
            raise ResolutionError(
                f"scale j={j} needs {N} points per axis (reach {reach:.4g}, box {self.box_length:g}, "
                f"oversampling {self.oversampling:g}); limit is {self.max_points}"
            )
        return GridSpec(self.dim, N, float(self.box_length))

    def t_grid(self, j: int) -> np.ndarray:
        return dyadic_t_grid(j, refine=self.t_refine)

    def validate(self):
        """Check every scale is resolvable without running anything."""
        for j in self.js:
            check_resolvable(self.grid(j), self.cutoff_spec(j), self.carrier(j), self.oversampling)

    def predicted_slope(self) -> Fraction:
        """Focusing, plate, cone: the matching maximand minus ``Re alpha``; smoothing: ``s(p, q)``."""
        if self.family == "smoothing":
            return smoothing_order(self.point)
        idx = {"focusing": 0, "plate": 1, "cone": 2}[self.family]
        return sigma_terms(self.point)[idx] - Fraction(self.alpha.re).limit_denominator(10 ** 9)


@dataclass
class ScalingRow:
    j: int
    points_per_axis: int
    in_norm: float
    out_norm_restricted: float
    out_norm_full: float
    ratio: float
    log2_ratio: float
    extra: Dict[str, float] = dc_field(default_factory=dict)


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residual_max: float


def fit_slope(rows: Sequence, window: Optional[Tuple[int, int]] = None) -> SlopeFit:
    """Least squares of ``log2_ratio`` against ``j`` over ``window`` (inclusive ``j`` bounds).

    ``rows`` may be :class:`ScalingRow` objects or ``(j, log2_ratio)`` pairs.
    """
    pts = [(r.j, r.log2_ratio) if isinstance(r, ScalingRow) else (r[0], r[1]) for r in rows]
    if window is not None:
        pts = [(j, y) for j, y in pts if window[0] <= j <= window[1]]
    if len(pts) < 2 or len({j for j, _ in pts}) < 2:
        raise ValueError("slope window needs at least two distinct scales")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if not np.isfinite(y).all():
        raise ValueError("non-finite log ratios in slope window")
    xm, ym = x.mean(), y.mean()
    slope = float(((x - xm) * (y - ym)).sum() / ((x - xm) ** 2).sum())
    intercept = float(ym - slope * xm)
    resid = float(np.abs(y - (intercept + slope * x)).max())
    return SlopeFit(slope, intercept, resid)


@dataclass
class ScalingReport:
    config: ExperimentConfig
    rows: List[ScalingRow]
    fitted_slope: float
    slope_window: Tuple[int, int]
    predicted_slope: Fraction
    tolerance: float
    residual_max: float
    input_slope: float
    verdict: bool
    runtime: float
    notes: Dict[str, object] = dc_field(default_factory=dict)

    @property
    def verdict_text(self) -> str:
        return "pass" if self.verdict else "fail"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["family", "n", "alpha_re", "alpha_im", "p", "q", "j", "in_norm",
                    "out_norm_restricted", "out_norm_full", "log2_ratio"])
        c = self.config
        pt = c.point
        for r in self.rows:
            w.writerow([c.family, c.dim, f"{c.alpha.re:.6f}", f"{c.alpha.im:.6f}", exponent_text(pt.inv_p),
                        exponent_text(pt.inv_q), r.j, f"{r.in_norm:.10e}", f"{r.out_norm_restricted:.10e}",
                        f"{r.out_norm_full:.10e}", f"{r.log2_ratio:.10f}"])
        return buf.getvalue()

    def summary(self, include_runtime: bool = True) -> dict:
        out = {
            "family": self.config.family,
            "fitted_slope": round(self.fitted_slope, 10),
            "predicted_slope": format_fraction(self.predicted_slope),
            "predicted_slope_float": round(float(self.predicted_slope), 10),
            "comparison": "upper_bound" if self.config.family == "smoothing" else "match",
            "slope_window": list(self.slope_window),
            "tolerance": self.tolerance,
            "residual_max": round(self.residual_max, 10),
            "input_slope": round(self.input_slope, 10),
            "verdict": self.verdict_text,
            "notes": {k: (round(v, 10) if isinstance(v, float) else v) for k, v in self.notes.items()},
        }
        if include_runtime:
            out["runtime"] = round(self.runtime, 3)
        return out

    def json(self, include_runtime: bool = True) -> str:
        return json.dumps(self.summary(include_runtime), indent=2, sort_keys=True)


# -- input construction ----------------------------------------------------------


def _spectrum_ones(spec: GridSpec, carrier) -> GridField:
    return GridField(spec, np.ones(spec.shape, dtype=complex), FREQUENCY, carrier)


def build_input(config: ExperimentConfig, j: int, rng: Optional[np.random.Generator] = None) -> GridField:
    """The family's test function at scale ``j``, in frequency representation."""
    spec = config.grid(j)
    base = _spectrum_ones(spec, config.carrier(j))
    cs = config.cutoff_spec(j)
    if config.family == "focusing" or (config.family == "smoothing" and config.smoothing_input == "focusing"):
        base = cutoff(base, CutoffSpec("chirp"))
    elif config.family == "smoothing" and config.smoothing_input == "random":
        rng = rng if rng is not None else np.random.default_rng([config.seed, j])
        noise = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
        base = GridField(spec, noise, FREQUENCY, base.carrier)
    return cutoff(base, cs, config.oversampling)


# -- per-family measurements -----------------------------------------------------


def _focusing_row(config: ExperimentConfig, j: int) -> ScalingRow:
    pt = config.point
    f = build_input(config, j)
    spec = f.spec
    fs = f.to_space()
    out = apply_multiplier(f, RadialMultiplier(config.dim, "spherical_mean", config.alpha, t=1.0)).to_space()
    q = _as_float_exponent(pt.inv_q)
    mask = make_mask(spec, "ball", radius=max(config.epsilon * 2.0 ** -j, spec.spacing / 2))
    inn = lebesgue_norm(fs, _as_float_exponent(pt.inv_p))
    res = lebesgue_norm(out, q, mask)
    full = lebesgue_norm(out, q)
    return ScalingRow(j, spec.points_per_axis, inn, res, full, res / inn, math.log2(res / inn),
                      {"mask_cells": float(mask.count)})


def _maximal_row(config: ExperimentConfig, j: int) -> ScalingRow:
    pt = config.point
    f = build_input(config, j)
    spec = f.spec
    res = maximal_over_t(f, config.alpha, config.t_grid(j), return_argmax=True)
    q = _as_float_exponent(pt.inv_q)
    if config.family == "plate":
        mask = make_mask(spec, "slab", lower=1.0, upper=2.0, halfwidth=2.0 ** (-j / 2.0))
    else:
        mask = make_mask(spec, "sector", r_min=1.0, r_max=2.0, width=config.mask_width)
    inn = lebesgue_norm(f.to_space(), _as_float_exponent(pt.inv_p))
    out_r = lebesgue_norm(res.field, q, mask)
    out_f = lebesgue_norm(res.field, q)
    extra = {"mask_cells": float(mask.count), "t_samples": float(len(config.t_grid(j)))}
    if config.family == "cone":
        # wave-front diagnostic: where the sup is attained relative to |x|
        r = spec.radius()[mask.indicator]
        dev = np.abs(res.argmax_t[mask.indicator] - r)
        extra["argmax_t_minus_r_median"] = float(np.median(dev))
        extra["argmax_t_minus_r_p90"] = float(np.quantile(dev, 0.9))
        extra["argmax_t_minus_r_scale"] = 2.0 ** -j
    return ScalingRow(j, spec.points_per_axis, inn, out_r, out_f, out_r / inn, math.log2(out_r / inn), extra)


def space_time_norm(f: GridField, t_grid: np.ndarray, q: float, sign: int = +1) -> float:
    """``(int ||e^{sign 2 pi i t sqrt(-Delta)} f||_q^q dt)^{1/q}`` by the trapezoid rule; ``q = inf`` is a max."""
    fh = f.to_frequency()
    spec = fh.spec
    sup = _support(fh)
    ts = np.asarray(t_grid, dtype=float)
    per_t = np.empty(ts.size)
    for i, t in enumerate(ts):
        vals = sup.values * np.exp(sign * 2j * np.pi * t * sup.radii)[sup.inverse]
        mod = np.abs(_inverse(_scatter(spec, sup, vals), spec))
        per_t[i] = lp_norm_of_modulus(mod, q, spec.cell_volume)
    if math.isinf(q):
        return float(per_t.max())
    if ts.size == 1:
        return float(per_t[0])
    w = np.full(ts.size, ts[1] - ts[0])
    w[0] = w[-1] = (ts[1] - ts[0]) / 2
    top = per_t.max()
    if top == 0:
        return 0.0
    return float(top * (np.sum(w * (per_t / top) ** q)) ** (1.0 / q))


def _smoothing_row(config: ExperimentConfig, j: int) -> ScalingRow:
    pt = config.point
    f = build_input(config, j)
    spec = f.spec
    inn = lebesgue_norm(f.to_space(), _as_float_exponent(pt.inv_p))
    out = space_time_norm(f, config.t_grid(j), _as_float_exponent(pt.inv_q))
    return ScalingRow(j, spec.points_per_axis, inn, out, out, out / inn, math.log2(out / inn))


_ROW_BUILDERS = {"focusing": _focusing_row, "plate": _maximal_row, "cone": _maximal_row, "smoothing": _smoothing_row}


def _run(config: ExperimentConfig) -> ScalingReport:
    t0 = time.perf_counter()
    config.validate()
    build = _ROW_BUILDERS[config.family]
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            rows = list(pool.map(lambda j: build(config, j), config.js))
    else:
        rows = [build(config, j) for j in config.js]
    rows.sort(key=lambda r: r.j)
    window = (config.js[-config.window], config.js[-1])
    fit = fit_slope(rows, window)
    in_fit = fit_slope([(r.j, math.log2(r.in_norm)) for r in rows], window)
    predicted = config.predicted_slope()
    if config.family == "smoothing":
        verdict = fit.slope <= float(predicted) + config.tolerance
    else:
        verdict = abs(fit.slope - float(predicted)) <= config.tolerance
    notes: Dict[str, object] = {}
    if config.family == "smoothing":
        notes["estimate"] = "lower" if config.smoothing_input == "random" else "deterministic"
    if config.family in ("plate", "cone", "focusing"):
        full_fit = fit_slope([(r.j, math.log2(r.out_norm_full / r.in_norm)) for r in rows], window)
        notes["full_domain_slope"] = full_fit.slope
    return ScalingReport(config, rows, fit.slope, window, predicted, float(config.tolerance), fit.residual_max,
                         in_fit.slope, bool(verdict), time.perf_counter() - t0, notes)


def _require(config: ExperimentConfig, family: str):
    if config.family != family:
        raise ValueError(f"expected a {family} config, got {config.family}")


def run_focusing(config: ExperimentConfig) -> ScalingReport:
    _require(config, "focusing")
    return _run(config)


def run_plate(config: ExperimentConfig) -> ScalingReport:
    _require(config, "plate")
    return _run(config)


def run_cone(config: ExperimentConfig) -> ScalingReport:
    _require(config, "cone")
    return _run(config)


def run_smoothing(config: ExperimentConfig) -> ScalingReport:
    _require(config, "smoothing")
    return _run(config)


def run_experiment(config: ExperimentConfig) -> ScalingReport:
    return _run(config)


def sensitivity_sweep(config: ExperimentConfig, parameter: str, values: Sequence[float]) -> List[ScalingReport]:
    """Rerun ``config`` with ``parameter`` set to each value (e.g. ``delta`` in 1/8, 1/4, 1/2)."""
    if parameter not in ("delta", "epsilon", "mask_width", "aperture_inner"):
        raise ValueError(f"no sweep defined for {parameter!r}")
    out = []
    for v in values:
        d = config.to_dict()
        d[parameter] = v
        out.append(_run(ExperimentConfig.from_dict(d)))
    return out
