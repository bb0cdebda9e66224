"""Spherical means of complex order as radial Fourier multipliers.

The order-``alpha`` mean has symbol

    m_alpha(r) = pi^{1-alpha} r^{-n/2-alpha+1} J_{n/2+alpha-1}(2 pi r)
               = pi^{n/2} Lambda_beta(2 pi r),   beta = n/2 + alpha - 1,

with ``Lambda_beta(z) = J_beta(z) / (z/2)^beta`` entire in ``z`` and ``beta``.  The
second form fills the removable singularity at ``r = 0`` and is entire in
``alpha``, so the operator is defined for every complex order without ever
touching the (divergent for ``Re alpha <= 0``) kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.fft

from .field import FREQUENCY, SPACE, GridField, GridSpec, ResolutionError, fft_workers, _inverse
from .specfun import ComplexOrder, bessel_j_scaled, gamma, hankel_coefficients

MULTIPLIER_KINDS = ("spherical_mean", "surface_mean", "half_wave_plus", "half_wave_minus", "bracket_power", "cutoff")
CUTOFF_KINDS = ("lowpass", "dyadic", "annulus", "plate", "cone_sector", "chirp")


# -- smooth profiles ---------------------------------------------------------------


def smoothstep(u):
    """7th-order smoothstep: 0 for u <= 0, 1 for u >= 1, three vanishing derivatives at both ends."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u ** 4 * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u ** 3)


def lowpass_profile(r, M: float = 1.0):
    """1 on ``[0, M]``, 0 beyond ``2M``."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - M) / M)


def dyadic_profile(r, j: int, M: float = 1.0):
    """``psi_j(r) = phi(2^{-j} r) - phi(2^{-j+1} r)``; with ``phi`` these sum to 1."""
    r = np.asarray(r, dtype=float)
    return lowpass_profile(r * 2.0 ** -j, M) - lowpass_profile(r * 2.0 ** (1 - j), M)


def plateau_profile(x, inner: float, outer: float):
    """Even bump in ``|x|``: 1 for ``|x| <= inner``, 0 for ``|x| >= outer``."""
    x = np.abs(np.asarray(x, dtype=float))
    return 1.0 - smoothstep((x - inner) / (outer - inner))


def band_profile(r, plateau: Tuple[float, float], support: Tuple[float, float]):
    """1 on ``plateau``, 0 outside ``support``, smooth in between."""
    r = np.asarray(r, dtype=float)
    (a, b), (a0, b0) = plateau, support
    return smoothstep((r - a0) / (a - a0)) * (1.0 - smoothstep((r - b) / (b0 - b)))


# -- multiplier symbols ------------------------------------------------------------


def spherical_multiplier(n: int, alpha, r):
    """Symbol of the order-``alpha`` spherical mean at radius ``r >= 0``."""
    a = complex(ComplexOrder.coerce(alpha))
    beta = n / 2.0 + a - 1.0
    out = math.pi ** (n / 2.0) * np.asarray(bessel_j_scaled(beta, 2.0 * np.pi * np.asarray(r, dtype=float)))
    return complex(out) if out.ndim == 0 else out


def surface_multiplier(n: int, r):
    """Symbol of the normalized surface measure on the unit sphere (value 1 at the origin)."""
    out = complex(gamma(n / 2.0)).real * np.asarray(bessel_j_scaled(n / 2.0 - 1.0, 2.0 * np.pi * np.asarray(r, dtype=float)))
    return complex(out) if out.ndim == 0 else out


def ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class CutoffSpec:
    """A frequency cutoff.

    kinds: ``lowpass`` (``phi_M``), ``dyadic`` (``psi_j``), ``annulus`` (radial bump
    ``band_profile(2^{-j}|xi|)``), ``plate``, ``cone_sector`` (annulus times the
    degree-0 angular cutoff), ``chirp`` (``e^{-2 pi i |xi|}``).
    """

    kind: str
    j: int = 0
    M: float = 1.0
    delta: float = 0.25
    plateau: Tuple[float, float] = (1.0, 2.0)
    support: Tuple[float, float] = (0.5, 2.25)
    direction: Optional[Tuple[float, ...]] = None
    aperture_inner: float = 1e-2
    aperture_outer: float = 9.0 ** -2

    def __post_init__(self):
        if self.kind not in CUTOFF_KINDS:
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if self.kind == "cone_sector" and not 0 < self.aperture_inner < self.aperture_outer < 2:
            raise ValueError("cone apertures must satisfy 0 < inner < outer < 2")
        if not (self.support[0] < self.plateau[0] < self.plateau[1] < self.support[1]):
            raise ValueError("plateau must sit strictly inside support")

    def _direction(self, dim: int) -> np.ndarray:
        v = np.zeros(dim)
        v[0] = 1.0
        if self.direction is not None:
            v = np.asarray(self.direction, dtype=float)
            v = v / np.linalg.norm(v)
        return v

    @property
    def radial(self) -> bool:
        return self.kind in ("lowpass", "dyadic", "annulus", "chirp")

    def radial_symbol(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "lowpass":
            return lowpass_profile(r, self.M)
        if self.kind == "dyadic":
            return dyadic_profile(r, self.j, self.M)
        if self.kind == "annulus":
            return band_profile(r * 2.0 ** -self.j, self.plateau, self.support)
        if self.kind == "chirp":
            return np.exp(-2j * np.pi * r)
        raise ValueError(f"{self.kind} cutoff is not radial")

    def symbol(self, xis: Sequence[np.ndarray]):
        """Evaluate on broadcastable frequency coordinates."""
        if self.radial:
            return self.radial_symbol(np.sqrt(sum(x * x for x in xis)))
        dim = len(xis)
        if self.kind == "plate":
            s = 2.0 ** self.j
            along = plateau_profile((xis[0] - s) / (self.delta * s / 2.0), 0.5, 1.0)
            trans = np.sqrt(sum(x * x for x in xis[1:])) if dim > 1 else 0.0
            return along * plateau_profile(trans / (self.delta * 2.0 ** (self.j / 2.0)), 0.5, 1.0)
        # cone_sector
        r = np.sqrt(sum(x * x for x in xis))
        v = self._direction(dim)
        with np.errstate(invalid="ignore", divide="ignore"):
            chord2 = sum((x / r - vk) ** 2 for x, vk in zip(xis, v))
        chord = np.sqrt(np.nan_to_num(chord2, nan=4.0))
        ang = plateau_profile(chord, self.aperture_inner, self.aperture_outer)
        return ang * band_profile(r * 2.0 ** -self.j, self.plateau, self.support)

    def bounding_box(self, dim: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Axis-aligned box containing the support, or ``None`` for unimodular cutoffs."""
        s = 2.0 ** self.j
        if self.kind == "chirp":
            return None
        if self.kind in ("lowpass", "dyadic"):
            R = 2.0 * self.M * s
            return -R * np.ones(dim), R * np.ones(dim)
        if self.kind == "annulus":
            R = self.support[1] * s
            return -R * np.ones(dim), R * np.ones(dim)
        if self.kind == "plate":
            w = self.delta * 2.0 ** (self.j / 2.0)
            lo = -w * np.ones(dim)
            hi = w * np.ones(dim)
            lo[0], hi[0] = s - self.delta * s / 2.0, s + self.delta * s / 2.0
            return lo, hi
        # cone_sector: every support point is within r * chord of r v, r in [r0, r1]
        v = self._direction(dim)
        r0, r1 = self.support[0] * s, self.support[1] * s
        pad = r1 * self.aperture_outer
        return np.minimum(r0 * v, r1 * v) - pad, np.maximum(r0 * v, r1 * v) + pad


def check_resolvable(spec: GridSpec, cspec: CutoffSpec, carrier=None, oversampling: float = 1.0):
    """Raise :class:`ResolutionError` if the cutoff support does not fit the resolved band."""
    box = cspec.bounding_box(spec.dim)
    if box is None:
        return
    kappa = np.zeros(spec.dim) if carrier is None else np.asarray(carrier, dtype=float)
    lo, hi = box
    reach = np.maximum(np.abs(lo - kappa), np.abs(hi - kappa)).max()
    if reach * oversampling >= spec.max_frequency:
        raise ResolutionError(
            f"{cspec.kind} cutoff reaches frequency offset {reach:.4g}; grid resolves {spec.max_frequency:.4g}"
            f" (oversampling {oversampling:g})"
        )


def cutoff(field: GridField, cspec: CutoffSpec, oversampling: float = 1.0) -> GridField:
    """Multiply the spectrum of ``field`` by the cutoff symbol."""
    check_resolvable(field.spec, cspec, field.carrier, oversampling)
    fh = field.to_frequency()
    sym = cspec.symbol(fh.spec.frequencies(fh.carrier))
    return GridField(fh.spec, fh.samples * sym, FREQUENCY, fh.carrier)


# -- radial multipliers and their application ---------------------------------------


@dataclass(frozen=True)
class RadialMultiplier:
    dim: int
    kind: str = "spherical_mean"
    order: ComplexOrder = dc_field(default_factory=lambda: ComplexOrder(0.0, 0.0))
    t: float = 1.0
    power: float = 0.0
    cutoff: Optional[CutoffSpec] = None

    def __post_init__(self):
        if self.kind not in MULTIPLIER_KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        object.__setattr__(self, "order", ComplexOrder.coerce(self.order))
        if self.kind == "cutoff" and (self.cutoff is None or not self.cutoff.radial):
            raise ValueError("cutoff multipliers need a radial CutoffSpec")

    def with_t(self, t: float) -> "RadialMultiplier":
        return RadialMultiplier(self.dim, self.kind, self.order, t, self.power, self.cutoff)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "spherical_mean":
            return spherical_multiplier(self.dim, self.order, self.t * r)
        if self.kind == "surface_mean":
            return surface_multiplier(self.dim, self.t * r)
        if self.kind == "half_wave_plus":
            return np.exp(2j * np.pi * self.t * r)
        if self.kind == "half_wave_minus":
            return np.exp(-2j * np.pi * self.t * r)
        if self.kind == "bracket_power":
            return (1.0 + r * r) ** (self.power / 2.0) + 0j
        return np.asarray(self.cutoff.radial_symbol(self.t * r), dtype=complex)


@dataclass
class _Support:
    """Nonzero spectrum entries grouped by distinct radius."""

    index: np.ndarray
    values: np.ndarray
    radii: np.ndarray
    inverse: np.ndarray


def _support(fh: GridField) -> _Support:
    spec = fh.spec
    idx = np.flatnonzero(fh.samples)
    vals = fh.samples.reshape(-1)[idx]
    # lattice frequencies are integers over L, so |xi|^2 L^2 is an exact integer key
    N = spec.points_per_axis
    ints = np.unravel_index(idx, spec.shape)
    key = np.zeros(idx.shape, dtype=np.int64)
    for ax, ii in enumerate(ints):
        k = np.where(ii < N // 2, ii, ii - N).astype(np.int64) + int(round(fh.carrier[ax] * spec.box_length))
        key += k * k
    uniq, inv = np.unique(key, return_inverse=True)
    return _Support(idx, vals, np.sqrt(uniq.astype(float)) / spec.box_length, inv)


def _scatter(spec: GridSpec, sup: _Support, values: np.ndarray) -> np.ndarray:
    full = np.zeros(int(np.prod(spec.shape)), dtype=complex)
    full[sup.index] = values
    return full.reshape(spec.shape)


def apply_multiplier(field: GridField, mult: RadialMultiplier) -> GridField:
    """``f -> F^{-1}[m(|xi|) f^]``, returned in the representation of the input."""
    fh = field.to_frequency()
    sup = _support(fh)
    out = GridField(fh.spec, _scatter(fh.spec, sup, sup.values * mult(sup.radii)[sup.inverse]), FREQUENCY, fh.carrier)
    return out if field.representation == FREQUENCY else out.to_space()


def half_wave(field: GridField, t: float, sign: int = +1) -> GridField:
    """``e^{sign 2 pi i t sqrt(-Delta)} f``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    kind = "half_wave_plus" if sign > 0 else "half_wave_minus"
    return apply_multiplier(field, RadialMultiplier(field.spec.dim, kind, t=t))


@dataclass
class MaximalResult:
    field: GridField
    argmax_t: Optional[np.ndarray] = None


def maximal_over_t(
    field: GridField,
    alpha,
    t_grid: Sequence[float],
    return_argmax: bool = False,
    kind: str = "spherical_mean",
):
    """Pointwise ``max_t |M^alpha_t f|`` over ``t_grid``; a nonnegative real field.

    With ``return_argmax`` a :class:`MaximalResult` also holds the maximizing ``t``
    per grid point.
    """
    ts = np.asarray(list(t_grid), dtype=float)
    if ts.size == 0:
        raise ValueError("empty t-grid")
    if (np.diff(ts) < 0).any():
        raise ValueError("t-grid must be sorted")
    fh = field.to_frequency()
    spec = fh.spec
    sup = _support(fh)
    mult = RadialMultiplier(spec.dim, kind, ComplexOrder.coerce(alpha))
    best = np.zeros(spec.shape)
    arg = np.full(spec.shape, ts[0]) if return_argmax else None
    for t in ts:
        vals = sup.values * mult.with_t(t)(sup.radii)[sup.inverse]
        mod = np.abs(_inverse(_scatter(spec, sup, vals), spec))  # carrier phase has modulus 1
        if return_argmax:
            upd = mod > best
            arg[upd] = t
            np.maximum(best, mod, out=best)
        else:
            np.maximum(best, mod, out=best)
    out = GridField(spec, best, SPACE, fh.carrier)
    return MaximalResult(out, arg) if return_argmax else out


def dyadic_t_grid(j: int, t_min: float = 1.0, t_max: float = 2.0, refine: int = 1):
    """Uniform grid on ``[t_min, t_max]`` with spacing ``2^{-j}/(4 refine)``."""
    steps = int(round((t_max - t_min) * 4 * refine * 2 ** j))
    return np.linspace(t_min, t_max, steps + 1)


# -- asymptotic decomposition ------------------------------------------------------


@dataclass
class Decomposition:
    r: np.ndarray
    low: np.ndarray
    principal_plus: np.ndarray
    principal_minus: np.ndarray
    residual: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.low + self.principal_plus + self.principal_minus + self.residual


def amplitude_constant(alpha) -> complex:
    """``c = 2^{-1/2} pi^{1/2 - alpha}``."""
    a = complex(ComplexOrder.coerce(alpha))
    return 2.0 ** -0.5 * np.exp((0.5 - a) * math.log(math.pi))


def principal_amplitudes(n: int, alpha, N: int, r, with_cutoff_M: Optional[float] = None):
    """``a_1(r), a_2(r)``: slowly varying amplitudes of the ``e^{+-2 pi i r}`` parts."""
    a = complex(ComplexOrder.coerce(alpha))
    coeffs = hankel_coefficients(n / 2.0 + a - 1.0, N)
    r = np.asarray(r, dtype=float)
    z = 2.0 * np.pi * r
    a1 = np.zeros(r.shape, dtype=complex)
    a2 = np.zeros(r.shape, dtype=complex)
    inv = 1.0 / z
    for bk, dk in zip(reversed(coeffs.b), reversed(coeffs.d)):
        a1 = a1 * inv + bk
        a2 = a2 * inv + dk
    c = amplitude_constant(a)
    a1, a2 = c * a1, c * a2
    if with_cutoff_M is not None:
        damp = 1.0 - lowpass_profile(r, with_cutoff_M)
        a1, a2 = a1 * damp, a2 * damp
    return a1, a2


def decompose_multiplier(n: int, alpha, N: int, M: float, r_samples) -> Decomposition:
    """Split the symbol into ``phi m``, ``e^{2 pi i r} r^{-(n-1)/2-alpha} a_1``, the minus part and a residual."""
    if N < 1 or M < 1:
        raise ValueError("need N >= 1 and M >= 1")
    a = complex(ComplexOrder.coerce(alpha))
    r = np.asarray(r_samples, dtype=float)
    exact = np.asarray(spherical_multiplier(n, a, r), dtype=complex)
    low = lowpass_profile(r, M) * exact
    pos = r > 0
    weight = np.zeros(r.shape, dtype=complex)
    weight[pos] = np.exp(-((n - 1) / 2.0 + a) * np.log(r[pos]))
    a1, a2 = principal_amplitudes(n, a, N, np.where(pos, r, 1.0), with_cutoff_M=M)
    plus = np.where(pos, np.exp(2j * np.pi * r) * weight * a1, 0)
    minus = np.where(pos, np.exp(-2j * np.pi * r) * weight * a2, 0)
    residual = exact - low - plus - minus
    return Decomposition(r, low, plus, minus, residual)


@dataclass
class AmplitudeSweep:
    M: np.ndarray
    infimum: np.ndarray
    arg_oscillation: np.ndarray
    theta: complex
    smallest_M: Optional[float]
    tolerance: float


def amplitude_sweep(n: int, alpha, N: int, M_values: Sequence[float], r_max: float = 1024.0,
                    samples: int = 4096, tolerance: float = 1e-2) -> AmplitudeSweep:
    """Empirical ``inf_{r >= M} |a_1(r)|`` and ``sup_{r >= M} |arg a_1(r) - theta|`` per ``M``.

    ``theta`` is the limiting phase ``arg a_1(infinity)``; the ``(1 - phi)`` factor is
    omitted since it only shrinks ``a_1`` on the transition band.
    """
    Ms = np.asarray(list(M_values), dtype=float)
    a = complex(ComplexOrder.coerce(alpha))
    theta = complex(amplitude_constant(a) * hankel_coefficients(n / 2.0 + a - 1.0, 1).b[0])
    inf = np.empty(Ms.shape)
    osc = np.empty(Ms.shape)
    for i, M in enumerate(Ms):
        r = np.geomspace(M, max(r_max, 2 * M), samples)
        a1, _ = principal_amplitudes(n, a, N, r)
        inf[i] = np.abs(a1).min()
        osc[i] = np.abs(np.angle(a1 / theta)).max()
    ok = np.flatnonzero(osc <= tolerance)
    smallest = float(Ms[ok[0]]) if ok.size and (osc[ok[0]:] <= tolerance).all() else None
    return AmplitudeSweep(Ms, inf, osc, theta, smallest, tolerance)


def dyadic_envelope(r: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Max of ``|values|`` over dyadic bins ``[2^k, 2^{k+1})``: (bin left ends, maxima)."""
    r = np.asarray(r, dtype=float)
    v = np.abs(np.asarray(values))
    ks = np.floor(np.log2(r)).astype(int)
    lefts, maxima = [], []
    for k in np.unique(ks):
        sel = ks == k
        lefts.append(2.0 ** k)
        maxima.append(v[sel].max())
    return np.asarray(lefts), np.asarray(maxima)


def residual_decay_slope(n: int, alpha, N: int, M: float, r_min: float = 8.0, r_max: float = 1024.0,
                         samples: int = 8192, floor: float = 1e-13) -> float:
    """log-log slope of the dyadic envelope of the recomposition residual on ``[r_min, r_max]``.

    Returns ``-inf`` when the residual sits at roundoff everywhere (the expansion is exact).
    """
    r = np.geomspace(r_min, r_max, samples, endpoint=False)
    dec = decompose_multiplier(n, alpha, N, M, r)
    left, env = dyadic_envelope(r, dec.residual)
    scale = np.abs(np.asarray(spherical_multiplier(n, alpha, r))).max()
    if (env <= floor * max(scale, 1.0)).all():
        return float("-inf")
    x = np.log2(left)
    y = np.log2(np.maximum(env, np.finfo(float).tiny))
    return float(np.polyfit(x, y, 1)[0])
