"""Periodic grid fields, Fourier transforms, norms and measurement masks.

A :class:`GridField` approximates a function on R^n by its samples on a
periodic box ``[-L/2, L/2)^n`` with ``N`` points per axis; the origin is the
grid point with index ``N // 2`` on every axis.  The Fourier convention is

    f^(xi) = int e^{+2 pi i x.xi} f(x) dx,     f(x) = int e^{-2 pi i x.xi} f^(xi) dxi,

discretized with cell-volume weights so that the discrete transform
approximates the continuum integral.  Frequencies are in cycles per unit
length and stored in FFT order.

A field may carry a lattice-aligned *carrier* frequency ``kappa``: its
frequency samples then sit at ``kappa + xi_k``, which lets a narrow spectrum
far from the origin live on a coarse grid.  Space samples always hold the
true field values; only moduli are carrier independent.
"""

from __future__ import annotations

import io
import json
import math
import os
import struct
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.fft

SPACE = "space"
FREQUENCY = "frequency"


def fft_workers() -> int:
    """Thread count for FFTs, from ``SPHMAX_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SPHMAX_THREADS", "1")))
    except ValueError:
        return 1


class ResolutionError(ValueError):
    """A requested frequency support is not resolvable on the grid."""


@dataclass(frozen=True)
class GridSpec:
    dim: int
    points_per_axis: int
    box_length: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        N = self.points_per_axis
        if N < 2 or N & (N - 1):
            raise ValueError(f"points_per_axis must be a power of two, got {N}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def frequency_step(self) -> float:
        return 1.0 / self.box_length

    @property
    def max_frequency(self) -> float:
        """Largest resolved frequency offset from the carrier, ``N / (2L)``."""
        return self.points_per_axis / (2.0 * self.box_length)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    def axis(self) -> np.ndarray:
        N = self.points_per_axis
        return (np.arange(N) - N // 2) * self.spacing

    def frequency_axis(self) -> np.ndarray:
        return scipy.fft.fftfreq(self.points_per_axis, d=self.spacing)

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays ``x_1, ..., x_n``."""
        ax = self.axis()
        return tuple(ax.reshape([-1 if i == k else 1 for i in range(self.dim)]) for k in range(self.dim))

    def frequencies(self, carrier: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, ...]:
        """Broadcastable frequency arrays ``xi_1, ..., xi_n`` (FFT order, carrier added)."""
        ax = self.frequency_axis()
        kappa = np.zeros(self.dim) if carrier is None else np.asarray(carrier, dtype=float)
        return tuple(
            (ax + kappa[k]).reshape([-1 if i == k else 1 for i in range(self.dim)]) for k in range(self.dim)
        )

    def radius(self) -> np.ndarray:
        r2 = sum(x * x for x in self.coordinates())
        return np.sqrt(r2)

    def frequency_modulus(self, carrier: Optional[Sequence[float]] = None) -> np.ndarray:
        return np.sqrt(sum(x * x for x in self.frequencies(carrier)))

    def check_carrier(self, carrier: Sequence[float]) -> Tuple[float, ...]:
        kappa = tuple(float(c) for c in carrier)
        if len(kappa) != self.dim:
            raise ValueError("carrier must have one component per axis")
        for c in kappa:
            m = c * self.box_length
            if abs(m - round(m)) > 1e-9:
                raise ValueError(f"carrier component {c} is not a lattice frequency (step {1 / self.box_length})")
        return kappa

    def require_band(self, center: Sequence[float], half_width: float, carrier=None):
        """Raise :class:`ResolutionError` unless ``center +- half_width`` lies in the resolved band."""
        kappa = np.zeros(self.dim) if carrier is None else np.asarray(carrier, dtype=float)
        offset = np.abs(np.asarray(center, dtype=float) - kappa) + half_width
        if (offset >= self.max_frequency).any():
            raise ResolutionError(
                f"frequency support reaches offset {offset.max():.4g} >= resolved {self.max_frequency:.4g}"
            )


@dataclass
class GridField:
    spec: GridSpec
    samples: np.ndarray
    representation: str = SPACE
    carrier: Tuple[float, ...] = dc_field(default=None)

    def __post_init__(self):
        if self.representation not in (SPACE, FREQUENCY):
            raise ValueError(f"unknown representation {self.representation!r}")
        self.samples = np.asarray(self.samples)
        if self.samples.shape != self.spec.shape:
            raise ValueError(f"samples have shape {self.samples.shape}, grid needs {self.spec.shape}")
        if self.carrier is None:
            self.carrier = (0.0,) * self.spec.dim
        else:
            self.carrier = self.spec.check_carrier(self.carrier)

    @classmethod
    def from_function(cls, spec: GridSpec, fn, carrier=None) -> "GridField":
        """Sample ``fn(x_1, ..., x_n)`` on the space grid."""
        vals = np.asarray(fn(*spec.coordinates()), dtype=complex)
        return cls(spec, np.broadcast_to(vals, spec.shape).copy(), SPACE, carrier)

    @classmethod
    def from_symbol(cls, spec: GridSpec, fn, carrier=None) -> "GridField":
        """Sample a frequency-side function ``fn(xi_1, ..., xi_n)``."""
        kappa = None if carrier is None else spec.check_carrier(carrier)
        vals = np.asarray(fn(*spec.frequencies(kappa)), dtype=complex)
        return cls(spec, np.broadcast_to(vals, spec.shape).copy(), FREQUENCY, kappa)

    @property
    def has_carrier(self) -> bool:
        return any(c != 0 for c in self.carrier)

    def _modulation(self, sign: float) -> np.ndarray:
        phase = sum(c * x for c, x in zip(self.carrier, self.spec.coordinates()))
        return np.exp(sign * 2j * np.pi * phase)

    def to_space(self) -> "GridField":
        return self if self.representation == SPACE else transform(self, "inverse")

    def to_frequency(self) -> "GridField":
        return self if self.representation == FREQUENCY else transform(self, "forward")

    def copy(self) -> "GridField":
        return GridField(self.spec, self.samples.copy(), self.representation, self.carrier)

    def scaled(self, c) -> "GridField":
        return GridField(self.spec, self.samples * c, self.representation, self.carrier)


def _forward(samples: np.ndarray, spec: GridSpec) -> np.ndarray:
    out = scipy.fft.ifftn(scipy.fft.ifftshift(samples), norm="forward", workers=fft_workers())
    return out * spec.cell_volume


def _inverse(samples: np.ndarray, spec: GridSpec) -> np.ndarray:
    out = scipy.fft.fftn(samples, workers=fft_workers())
    return scipy.fft.fftshift(out) / spec.box_length ** spec.dim


def transform(field: GridField, direction: str) -> GridField:
    """Forward (space -> frequency) or inverse transform of ``field``."""
    if direction == "forward":
        if field.representation != SPACE:
            raise ValueError("forward transform needs a space-representation field")
        s = field.samples
        if field.has_carrier:
            s = s * field._modulation(+1.0)
        return GridField(field.spec, _forward(s, field.spec), FREQUENCY, field.carrier)
    if direction == "inverse":
        if field.representation != FREQUENCY:
            raise ValueError("inverse transform needs a frequency-representation field")
        s = _inverse(field.samples, field.spec)
        if field.has_carrier:
            s = s * field._modulation(-1.0)
        return GridField(field.spec, s, SPACE, field.carrier)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def inverse_modulus(spectrum: np.ndarray, spec: GridSpec) -> np.ndarray:
    """``|f|`` on the space grid from frequency samples; the carrier drops out."""
    return np.abs(_inverse(spectrum, spec))


# -- masks -----------------------------------------------------------------------


@dataclass
class RegionMask:
    kind: str
    params: dict
    indicator: np.ndarray
    cell_volume: float

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.indicator))

    @property
    def measure(self) -> float:
        return self.cell_volume * self.count


def make_mask(spec: GridSpec, kind: str = "full", **params) -> RegionMask:
    """Cell-centre indicator of a measurement set.

    kinds and parameters:

    * ``full``
    * ``ball``: ``radius``, optional ``center``
    * ``slab``: ``lower``, ``upper`` (range of ``x_1``) and ``halfwidth`` (bound on ``|x'|``)
    * ``sector``: ``r_min``, ``r_max``, ``width`` (bound on ``|x/|x| - v|``), optional ``direction`` ``v``
    """
    half = spec.box_length / 2
    xs = spec.coordinates()
    if kind == "full":
        ind = np.ones(spec.shape, dtype=bool)
    elif kind == "ball":
        radius = float(params["radius"])
        center = np.asarray(params.get("center", (0.0,) * spec.dim), dtype=float)
        if radius <= 0 or (np.abs(center) > half).any():
            raise ValueError("ball must have positive radius and a center inside the box")
        ind = sum((x - c) ** 2 for x, c in zip(xs, center)) <= radius ** 2
    elif kind == "slab":
        lo, hi, w = float(params["lower"]), float(params["upper"]), float(params["halfwidth"])
        if not (-half <= lo < hi < half) or not 0 < w < half:
            raise ValueError("slab bounds must lie inside the box")
        trans = sum(x * x for x in xs[1:]) if spec.dim > 1 else np.zeros(1)
        ind = (xs[0] >= lo) & (xs[0] <= hi) & (trans <= w * w)
    elif kind == "sector":
        r0, r1, width = float(params["r_min"]), float(params["r_max"]), float(params["width"])
        v = np.asarray(params.get("direction", (1.0,) + (0.0,) * (spec.dim - 1)), dtype=float)
        v = v / np.linalg.norm(v)
        if not (0 <= r0 < r1 < half) or width <= 0:
            raise ValueError("sector radii must lie inside the box")
        r = spec.radius()
        with np.errstate(invalid="ignore", divide="ignore"):
            dist2 = sum((x / r - vk) ** 2 for x, vk in zip(xs, v))
        ind = (r >= r0) & (r <= r1) & (np.nan_to_num(dist2, nan=4.0) <= width * width)
    else:
        raise ValueError(f"unknown mask kind {kind!r}")
    ind = np.broadcast_to(ind, spec.shape).copy()
    return RegionMask(kind, dict(params), ind, spec.cell_volume)


# -- norms -----------------------------------------------------------------------


def _masked_modulus(field: GridField, mask: Optional[RegionMask]) -> np.ndarray:
    if field.representation != SPACE:
        raise ValueError("norms are taken of space-representation fields")
    a = np.abs(field.samples)
    if mask is None or mask.kind == "full":
        return a.reshape(-1)
    if mask.count == 0:
        raise ValueError("empty mask")
    return a[mask.indicator]


def lp_norm_of_modulus(values: np.ndarray, p: float, cell_volume: float) -> float:
    """Riemann-sum ``L^p`` norm of nonnegative samples."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("empty sample set")
    top = float(values.max())
    if math.isinf(p):
        return top
    if p < 1:
        raise ValueError("p must be in [1, inf]")
    if top == 0:
        return 0.0
    s = float(np.sum((values / top) ** p))
    return top * (s * cell_volume) ** (1.0 / p)


def lebesgue_norm(field: GridField, p: float, mask: Optional[RegionMask] = None) -> float:
    """``(sum |f|^p cellvol)^{1/p}`` over ``mask``; ``p = inf`` gives the masked max."""
    return lp_norm_of_modulus(_masked_modulus(field, mask), p, field.spec.cell_volume)


def japanese_bracket(spec: GridSpec, s: float, carrier=None) -> np.ndarray:
    return (1.0 + spec.frequency_modulus(carrier) ** 2) ** (s / 2.0)


def sobolev_norm(field: GridField, s: float, p: float, mask: Optional[RegionMask] = None) -> float:
    """``|| <D>^s f ||_{L^p}`` with ``<xi> = (1 + |xi|^2)^{1/2}`` (``xi`` in cycles)."""
    fh = field.to_frequency()
    weighted = GridField(fh.spec, fh.samples * japanese_bracket(fh.spec, s, fh.carrier), FREQUENCY, fh.carrier)
    return lebesgue_norm(weighted.to_space(), p, mask)


# -- persistence -------------------------------------------------------------------

_MAGIC = b"SPHMAXF1"


def dump_field(field: GridField, fh, dtype: str = "complex128"):
    """Write ``field`` to a binary stream: magic, header length, JSON header, raw samples."""
    if dtype not in ("complex64", "complex128"):
        raise ValueError("dtype must be complex64 or complex128")
    header = {
        "dim": field.spec.dim,
        "points_per_axis": field.spec.points_per_axis,
        "box_length": field.spec.box_length,
        "representation": field.representation,
        "carrier": list(field.carrier),
        "dtype": dtype,
        "byteorder": "little",
        "order": "C",
    }
    raw = json.dumps(header, sort_keys=True).encode()
    fh.write(_MAGIC)
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)
    fh.write(np.ascontiguousarray(field.samples, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


def load_field(fh) -> GridField:
    if fh.read(len(_MAGIC)) != _MAGIC:
        raise ValueError("not a field container")
    (n,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(n).decode())
    spec = GridSpec(header["dim"], header["points_per_axis"], header["box_length"])
    dt = np.dtype(header["dtype"]).newbyteorder("<")
    data = np.frombuffer(fh.read(), dtype=dt)
    if data.size != int(np.prod(spec.shape)):
        raise ValueError("truncated field container")
    samples = data.reshape(spec.shape).astype(complex)
    return GridField(spec, samples, header["representation"], tuple(header["carrier"]))


def save_field(field: GridField, path, dtype: str = "complex128"):
    with open(path, "wb") as fh:
        dump_field(field, fh, dtype)


def read_field(path) -> GridField:
    with open(path, "rb") as fh:
        return load_field(fh)


def radial_profile(field: GridField, bins: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """Mean ``|f|`` over spherical shells: ``(bin centres, means)`` (empty shells dropped)."""
    f = field.to_space()
    r = f.spec.radius().reshape(-1)
    a = np.abs(f.samples).reshape(-1)
    edges = np.linspace(0.0, f.spec.box_length / 2, bins + 1)
    idx = np.digitize(r, edges) - 1
    keep = (idx >= 0) & (idx < bins)
    sums = np.bincount(idx[keep], weights=a[keep], minlength=bins)
    counts = np.bincount(idx[keep], minlength=bins)
    centres = 0.5 * (edges[1:] + edges[:-1])
    ok = counts > 0
    return centres[ok], sums[ok] / counts[ok]


def radial_profile_csv(field: GridField, bins: int = 64) -> str:
    r, m = radial_profile(field, bins)
    buf = io.StringIO()
    buf.write("r,mean_modulus\n")
    for a, b in zip(r, m):
        buf.write(f"{a:.12e},{b:.12e}\n")
    return buf.getvalue()
