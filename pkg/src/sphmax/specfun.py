"""Complex Gamma, complex-order Bessel J and its large-argument expansion.

``bessel_j`` switches between three evaluators:

* ascending power series for ``r <= SERIES_MAX`` (no cancellation there),
* Miller backward recurrence normalized by the Neumann sum
  ``(r/2)^nu = sum_k (nu + 2k) Gamma(nu + k) / k! J_{nu+2k}(r)`` up to the
  asymptotic threshold,
* the Hankel expansion in its real ``P cos chi - Q sin chi`` form beyond it.

The two-phase coefficients ``b_j, d_j`` returned by :func:`hankel_coefficients`
are assembled separately, so :func:`expansion_residual` checks them against
an independent evaluation path.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

SERIES_MAX = 2.0
ASYMPTOTIC_MIN = 30.0

# B_{2k} / (2k (2k - 1)), k = 1..10
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
)
_STIRLING_SHIFT = 16.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ComplexOrder:
    """An order ``alpha`` (or a Bessel order ``beta``) stored as ``(re, im)``."""

    re: float
    im: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError("order components must be finite")

    @classmethod
    def coerce(cls, value) -> "ComplexOrder":
        if isinstance(value, ComplexOrder):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        z = complex(value)
        return cls(z.real, z.imag)

    @classmethod
    def parse(cls, text: str) -> "ComplexOrder":
        """Parse ``"a+bi"``, ``"a-bi"``, ``"a"`` or ``"bi"``."""
        t = text.strip().replace(" ", "").replace("I", "i").replace("j", "i")
        try:
            z = complex(t.replace("i", "j")) if t else None
        except ValueError:
            z = None
        if z is None:
            raise ValueError(f"cannot parse complex order {text!r}")
        return cls(z.real, z.imag)

    def __complex__(self):
        return complex(self.re, self.im)

    def __str__(self):
        sign = "+" if self.im >= 0 else "-"
        return f"{self.re:g}{sign}{abs(self.im):g}i"


def _order(value) -> complex:
    return complex(ComplexOrder.coerce(value))


# -- Gamma ---------------------------------------------------------------------


class GammaPoleError(ValueError):
    pass


def _is_pole(z: np.ndarray) -> np.ndarray:
    return (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))


def _sin_pi(z: np.ndarray) -> np.ndarray:
    k = np.round(z.real)
    sign = np.where(np.mod(k, 2) == 0, 1.0, -1.0)
    return sign * np.sin(np.pi * (z - k))


def _loggamma_right(z: np.ndarray) -> np.ndarray:
    """log Gamma(z) (any branch) for ``Re z >= 1/2``, via upward shift + Stirling."""
    m = np.maximum(0, np.ceil(_STIRLING_SHIFT - z.real)).astype(int)
    w = z + m
    inv = 1.0 / w
    inv2 = inv * inv
    acc = np.zeros_like(w)
    for c in reversed(_STIRLING):
        acc = acc * inv2 + c
    lg = (w - 0.5) * np.log(w) - w + _HALF_LOG_2PI + acc * inv
    log_prod = np.zeros_like(z)
    for k in range(int(m.max()) if m.size else 0):
        log_prod += np.where(k < m, np.log(z + k), 0.0)
    return lg - log_prod


def _gamma_array(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    right = z.real >= 0.5
    if right.any():
        out[right] = np.exp(_loggamma_right(z[right]))
    left = ~right
    if left.any():
        zl = z[left]
        out[left] = np.pi / (_sin_pi(zl) * np.exp(_loggamma_right(1.0 - zl)))
    return out


def gamma(z):
    """Gamma function for complex arguments (scalar or array).

    Raises :class:`GammaPoleError` at ``0, -1, -2, ...``.
    """
    arr = np.asarray(z, dtype=complex)
    if _is_pole(arr).any():
        raise GammaPoleError(f"Gamma has a pole at {z}")
    out = _gamma_array(arr.reshape(-1)).reshape(arr.shape)
    return complex(out) if out.ndim == 0 else out


def rgamma(z):
    """``1 / Gamma(z)``, entire; exactly zero at the poles of Gamma."""
    arr = np.asarray(z, dtype=complex).reshape(-1)
    out = np.zeros_like(arr)
    ok = ~_is_pole(arr)
    if ok.any():
        zz = arr[ok]
        right = zz.real >= 0.5
        val = np.empty_like(zz)
        val[right] = np.exp(-_loggamma_right(zz[right]))
        zl = zz[~right]
        val[~right] = _sin_pi(zl) * np.exp(_loggamma_right(1.0 - zl)) / np.pi
        out[ok] = val
    out = out.reshape(np.shape(z))
    return complex(out) if out.ndim == 0 else out


# -- Bessel J --------------------------------------------------------------------


def asymptotic_threshold(beta) -> float:
    """Argument above which ``bessel_j`` uses the Hankel expansion."""
    return max(ASYMPTOTIC_MIN, 2.0 * abs(_order(beta)) ** 2)


def _series_scaled(beta: complex, z: np.ndarray, terms: int = 40) -> np.ndarray:
    """``J_beta(z) / (z/2)^beta`` by its power series (Horner in ``z^2``)."""
    k = np.arange(terms)
    logfact = np.array([math.lgamma(i + 1.0) for i in range(terms)])
    coef = (-0.25) ** k * np.exp(-logfact) * rgamma(beta + 1.0 + k)
    u = z * z
    acc = np.full(z.shape, coef[-1], dtype=complex)
    for c in coef[-2::-1]:
        acc = acc * u + c
    return acc


def _miller(beta: complex, z: np.ndarray) -> np.ndarray:
    """``J_beta(z)`` by backward recurrence, for moderate ``z`` (``z > 0``)."""
    m = int(math.floor(beta.real - 0.5))
    nu0 = beta - m
    up = max(m, 0)
    zmax = float(z.max())
    K = int(math.ceil(max(zmax, abs(nu0) + up) + 12.0 * zmax ** (1.0 / 3.0) + 30)) + up

    big = 1e200
    y_next = np.zeros(z.shape, dtype=complex)
    y = np.full(z.shape, 1e-200, dtype=complex)
    # normalization weights (nu0 + 2i) Gamma(nu0 + i) / i!, for k = 2i
    g = [complex(gamma(nu0))]
    for i in range(K // 2 + 1):
        g.append(g[-1] * (nu0 + i) / (i + 1))
    norm = np.zeros(z.shape, dtype=complex)
    target = np.zeros(z.shape, dtype=complex)
    y1 = np.zeros(z.shape, dtype=complex)
    for k in range(K, -1, -1):
        # y holds the (unnormalized) order nu0 + k
        if k % 2 == 0:
            i = k // 2
            norm += (nu0 + 2 * i) * g[i] * y
        if k == up:
            target = y.copy()
        if k == 1:
            y1 = y.copy()
        if k == 0:
            break
        y_prev = (2.0 * (nu0 + k) / z) * y - y_next
        y_next, y = y, y_prev
        scale = np.abs(y) > big
        if scale.any():
            f = np.where(scale, 1.0 / big, 1.0)
            y *= f
            y_next *= f
            norm *= f
            target *= f
            y1 *= f
    factor = np.exp(nu0 * np.log(z / 2.0)) / norm
    if m >= 0:
        return target * factor
    # continue downward: orders nu0 - 1, ..., beta
    j_hi, j = y1 * factor, y * factor
    nu = nu0
    for _ in range(-m):
        j_lo = (2.0 * nu / z) * j - j_hi
        j_hi, j = j, j_lo
        nu -= 1
    return j


def _hankel_pq(beta: complex, z: np.ndarray, tol: float = 1e-17, max_terms: int = 200) -> np.ndarray:
    """``J_beta(z)`` for large ``z`` from ``sqrt(2/(pi z)) (P cos chi - Q sin chi)``."""
    mu = 4.0 * beta * beta
    zmin = float(z.min())
    inv = 1.0 / z
    P = np.ones(z.shape, dtype=complex)
    Q = np.zeros(z.shape, dtype=complex)
    a = 1.0 + 0j
    power = np.ones(z.shape)
    prev = math.inf
    shrinking = False
    for k in range(1, max_terms):
        a = a * (mu - (2 * k - 1) ** 2) / (8.0 * k)
        power = power * inv
        size = abs(a) / zmin ** k
        if size > prev and shrinking:
            break  # past the smallest term: optimal truncation
        shrinking = shrinking or size < prev
        # sign pattern of P = sum (-1)^i a_{2i} z^{-2i}, Q = sum (-1)^i a_{2i+1} z^{-2i-1}
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            P += sign * a * power
        else:
            Q += sign * a * power
        if size < tol or a == 0:
            break
        prev = size
    chi = z - (0.5 * beta + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * z)) * (P * np.cos(chi) - Q * np.sin(chi))


def _as_positive(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if (arr <= 0).any():
        raise ValueError("bessel_j needs r > 0")
    return arr


def bessel_j(beta, r):
    """Bessel function ``J_beta(r)`` for complex order ``beta`` and real ``r > 0``."""
    b = _order(beta)
    arr = _as_positive(r)
    flat = arr.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    thr = asymptotic_threshold(b)
    lo = flat <= SERIES_MAX
    mid = (flat > SERIES_MAX) & (flat <= thr)
    hi = flat > thr
    if lo.any():
        zl = flat[lo]
        out[lo] = _series_scaled(b, zl) * np.exp(b * np.log(zl / 2.0))
    if mid.any():
        out[mid] = _miller(b, flat[mid])
    if hi.any():
        out[hi] = _hankel_pq(b, flat[hi])
    out = out.reshape(arr.shape)
    return complex(out) if out.ndim == 0 else out


def bessel_j_scaled(beta, z):
    """``J_beta(z) / (z/2)^beta`` for ``z >= 0``; entire in ``beta``, equals ``1/Gamma(beta+1)`` at 0."""
    b = _order(beta)
    arr = np.asarray(z, dtype=float)
    if (arr < 0).any():
        raise ValueError("bessel_j_scaled needs z >= 0")
    flat = arr.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    lo = flat <= SERIES_MAX
    if lo.any():
        out[lo] = _series_scaled(b, flat[lo])
    hi = ~lo
    if hi.any():
        zh = flat[hi]
        out[hi] = bessel_j(b, zh) * np.exp(-b * np.log(zh / 2.0))
    out = out.reshape(arr.shape)
    return complex(out) if out.ndim == 0 else out


# -- two-phase asymptotic expansion ------------------------------------------------


@dataclass(frozen=True)
class AsymptoticCoefficients:
    """``b_j, d_j`` of ``J_beta(r) ~ r^{-1/2} (e^{ir} sum b_j r^{-j} + e^{-ir} sum d_j r^{-j})``."""

    order: ComplexOrder
    N: int
    b: tuple
    d: tuple


def _hankel_a(beta: complex, N: int) -> List[complex]:
    mu = 4.0 * beta * beta
    a = [1.0 + 0j]
    for k in range(1, N):
        a.append(a[-1] * (mu - (2 * k - 1) ** 2) / (8.0 * k))
    return a


def hankel_coefficients(beta, N: int) -> AsymptoticCoefficients:
    if N < 1:
        raise ValueError("N must be >= 1")
    bb = _order(beta)
    a = _hankel_a(bb, N)
    phase = cmath.exp(-1j * (bb * math.pi / 2 + math.pi / 4))
    c = (2 * math.pi) ** -0.5
    b = tuple(c * phase * (1j) ** k * a[k] for k in range(N))
    d = tuple(c / phase * (-1j) ** k * a[k] for k in range(N))
    return AsymptoticCoefficients(ComplexOrder.coerce(bb), N, b, d)


def hankel_expansion(coeffs: AsymptoticCoefficients, r) -> np.ndarray:
    """Evaluate the ``N``-term two-phase expansion at ``r``."""
    r = np.asarray(r, dtype=float)
    inv = 1.0 / r
    plus = np.zeros(r.shape, dtype=complex)
    minus = np.zeros(r.shape, dtype=complex)
    for bj, dj in zip(reversed(coeffs.b), reversed(coeffs.d)):
        plus = plus * inv + bj
        minus = minus * inv + dj
    return r ** -0.5 * (np.exp(1j * r) * plus + np.exp(-1j * r) * minus)


def expansion_residual(beta, N: int, r_samples: Sequence[float]) -> np.ndarray:
    """``|J_beta(r) - N-term expansion|`` at each sample (``r >= 1``)."""
    r = np.asarray(r_samples, dtype=float)
    if (r < 1).any():
        raise ValueError("expansion residuals are taken for r >= 1")
    coeffs = hankel_coefficients(beta, N)
    return np.abs(bessel_j(beta, r) - hankel_expansion(coeffs, r))


def bessel_envelope(beta, r) -> np.ndarray:
    """Size scale ``sqrt(2/(pi r)) cosh(pi Im(beta)/2)`` of ``J_beta`` on ``r >= 1``."""
    b = _order(beta)
    r = np.asarray(r, dtype=float)
    return np.sqrt(2.0 / (np.pi * r)) * math.cosh(math.pi * b.imag / 2)
