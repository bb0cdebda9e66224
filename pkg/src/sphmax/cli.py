"""Command-line front end.

Commands: ``exponents``, ``multiplier``, ``apply``, ``maximal``, ``experiment``, ``selftest``.
Exit codes: 0 success / all verdicts pass, 1 verdict failure, 2 invalid input or
config, 3 resolution refusal.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import random
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Tuple
from unittest import mock

import numpy as np

from . import __version__, exponents, field, operators, specfun
from .exponents import ExponentPoint, format_fraction
from .experiments import ExperimentConfig, run_experiment
from .field import GridField, GridSpec, ResolutionError
from .specfun import ComplexOrder

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_RESOLUTION = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _fmt(x: float) -> str:
    return f"{x + 0.0:.12e}"


def _fmt_complex(z: complex) -> str:
    return f"{z.real + 0.0:.12e}{z.imag + 0.0:+.12e}i"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@contextlib.contextmanager
def _output(path: Optional[str]) -> Iterator[io.TextIOBase]:
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _parse_alpha(text: str) -> ComplexOrder:
    try:
        return ComplexOrder.parse(text)
    except ValueError as exc:
        raise CliError(f"invalid alpha {text!r}: {exc}") from exc


# -- exponents -------------------------------------------------------------------


def exponent_record(point: ExponentPoint) -> dict:
    rec = {"inv_p": format_fraction(point.inv_p), "inv_q": format_fraction(point.inv_q)}
    rec["sigma"] = format_fraction(exponents.sigma(point))
    if point.dim == 2:
        rec["d"] = ""
        rec["s"] = format_fraction(exponents.s2(point))
        rec["region"] = f"s2-branch-{exponents.s2_branch(point)}"
        rec["boundary"] = ""
    else:
        rec["d"] = format_fraction(exponents.d_exponent(point))
        label = exponents.classify_region(point)
        rec["s"] = format_fraction(exponents.s_n(point))
        rec["region"] = label.tag
        rec["boundary"] = "true" if label.boundary else "false"
    return rec


def _grid_points(n: int, density: int) -> List[ExponentPoint]:
    pts = []
    for a in range(density + 1):
        for b in range(a + 1):
            pts.append(ExponentPoint(Fraction(a, density), Fraction(b, density), n))
    return pts


def cmd_exponents(args) -> int:
    n = args.n
    if n < 2:
        raise CliError("n must be >= 2")
    if args.figure1:
        if n < 3:
            raise CliError("the region geometry needs n >= 3")
        verts = exponents.figure1_vertices(n)
        doc = {
            "n": n,
            "vertices": {k: [format_fraction(x), format_fraction(y)] for k, (x, y) in verts.items()},
            "polygons": {
                tag: [[format_fraction(x), format_fraction(y)] for x, y in poly]
                for tag, poly in exponents.region_polygons(n).items()
            },
            "quadrangle": [[format_fraction(x), format_fraction(y)] for x, y in exponents.quadrangle_Q(n).corners],
        }
        with _output(args.out) as fh:
            fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    try:
        if args.point:
            pts = [ExponentPoint.parse(text, n) for text in args.point]
        else:
            pts = _grid_points(n, args.grid_density)
        records = [exponent_record(p) for p in pts]
    except (ValueError, ZeroDivisionError) as exc:
        raise CliError(f"malformed point: {exc}") from exc
    cols = ["inv_p", "inv_q", "sigma", "d", "s", "region", "boundary"]
    with _output(args.out) as fh:
        if args.format == "json":
            fh.write(json.dumps(records, indent=2) + "\n")
        else:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            w.writerows(records)
    return EXIT_OK


# -- multiplier ------------------------------------------------------------------


def cmd_multiplier(args) -> int:
    alpha = _parse_alpha(args.alpha)
    if args.samples < 2:
        raise CliError("samples must be >= 2")
    if args.n < 1:
        raise CliError("n must be positive")
    if args.decompose:
        N, M = int(args.decompose[0]), float(args.decompose[1])
        if N < 1 or M < 1:
            raise CliError("--decompose needs N >= 1 and M >= 1")
        r = np.linspace(args.rmin, args.rmax, args.samples)
        dec = operators.decompose_multiplier(args.n, alpha, N, M, r)
        with _output(args.out) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "low", "principal_plus", "principal_minus", "residual"])
            for i in range(r.size):
                w.writerow([_fmt(r[i]), _fmt_complex(dec.low[i]), _fmt_complex(dec.principal_plus[i]),
                            _fmt_complex(dec.principal_minus[i]), _fmt_complex(dec.residual[i])])
        lo = max(8.0, 2.0 * M)
        slope = operators.residual_decay_slope(args.n, alpha, N, M, r_min=lo, r_max=1024.0)
        bound = -(N + (args.n - 1) / 2.0 + alpha.re) + 0.3
        ok = slope <= bound
        sweep = operators.amplitude_sweep(args.n, alpha, N, [1, 2, 4, 8, 16, 32, 64])
        summary = {
            "residual_slope": "-inf" if math.isinf(slope) else round(slope, 6),
            "bound": round(bound, 6),
            "window": [lo, 1024.0],
            "verdict": "pass" if ok else "fail",
            "a1_infimum": {f"{m:g}": round(float(v), 8) for m, v in zip(sweep.M, sweep.infimum)},
            "a1_arg_oscillation": {f"{m:g}": round(float(v), 8) for m, v in zip(sweep.M, sweep.arg_oscillation)},
            "smallest_M_for_arg_tolerance": sweep.smallest_M,
        }
        sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
        return EXIT_OK if ok else EXIT_FAIL
    r = np.linspace(args.rmin, args.rmax, args.samples)
    mult = operators.RadialMultiplier(args.n, args.kind, alpha)
    vals = np.asarray(mult(r))
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "re", "im"])
        for ri, v in zip(r, vals):
            w.writerow([_fmt(ri), _fmt(v.real), _fmt(v.imag)])
    return EXIT_OK


# -- apply / maximal --------------------------------------------------------------


def _load(path: str) -> GridField:
    try:
        return field.read_field(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read field {path}: {exc}") from exc


def _same_path(a: str, b: str) -> bool:
    return os.path.abspath(a) == os.path.abspath(b)


def cmd_apply(args) -> int:
    if _same_path(args.input, args.output):
        raise CliError("refusing to overwrite the input field")
    f = _load(args.input)
    alpha = _parse_alpha(args.alpha)
    if args.kind == "half_wave":
        out = operators.half_wave(f, args.t, args.sign)
    else:
        mult = operators.RadialMultiplier(f.spec.dim, args.kind, alpha, t=args.t, power=args.power)
        out = operators.apply_multiplier(f, mult)
    out = out.to_space() if args.representation == "space" else out.to_frequency()
    field.save_field(out, args.output, args.dtype)
    if args.profile:
        with open(args.profile, "w") as fh:
            fh.write(field.radial_profile_csv(out))
    return EXIT_OK


def cmd_maximal(args) -> int:
    if _same_path(args.input, args.output):
        raise CliError("refusing to overwrite the input field")
    f = _load(args.input)
    alpha = _parse_alpha(args.alpha)
    if args.t_samples < 1 or not args.tmin <= args.tmax:
        raise CliError("need t_samples >= 1 and tmin <= tmax")
    ts = np.linspace(args.tmin, args.tmax, args.t_samples)
    out = operators.maximal_over_t(f, alpha, ts)
    field.save_field(out, args.output, args.dtype)
    if args.profile:
        with open(args.profile, "w") as fh:
            fh.write(field.radial_profile_csv(out))
    return EXIT_OK


# -- experiment ------------------------------------------------------------------

_CONFIG_FLAGS = (
    ("family", str), ("dim", int), ("alpha", str), ("p", str), ("q", str), ("delta", float),
    ("epsilon", float), ("box_length", float), ("oversampling", float), ("grid_refine", int),
    ("t_refine", int), ("max_points", int), ("aperture_inner", float), ("aperture_outer", float),
    ("mask_width", float), ("smoothing_input", str), ("seed", int), ("window", int),
    ("tolerance", float), ("workers", int),
)


def build_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config: {exc}") from exc
        if not isinstance(doc, dict):
            raise CliError("config must be a JSON object")
    for key, _ in _CONFIG_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if args.j_range is not None:
        doc["j_range"] = list(args.j_range)
    if "family" not in doc:
        raise CliError("config needs a family")
    try:
        cfg = ExperimentConfig.from_dict(doc)
        cfg.point  # noqa: B018 - validates exponents
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise CliError(f"invalid config: {exc}") from exc
    return cfg


def cmd_experiment(args) -> int:
    cfg = build_config(args)
    try:
        cfg.validate()
    except ResolutionError as exc:
        raise CliError(f"resolution refusal: {exc}", EXIT_RESOLUTION) from exc
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        report = run_experiment(cfg)
    except ResolutionError as exc:
        raise CliError(f"resolution refusal: {exc}", EXIT_RESOLUTION) from exc
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.name or cfg.family
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(report.csv())
    json_path.write_text(report.json(include_runtime=False) + "\n")
    manifest = {
        "command": "experiment",
        "config": cfg.to_dict(),
        "tool": "sphmax",
        "version": __version__,
        "seed": cfg.seed,
        "started": started,
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        "outputs": {p.name: sha256_file(p) for p in (csv_path, json_path)},
    }
    (out / f"{stem}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(f"{cfg.family}: fitted slope {report.fitted_slope:.4f}, predicted "
                     f"{float(report.predicted_slope):.4f}, tolerance {report.tolerance:g} -> {report.verdict_text}\n")
    return EXIT_OK if report.verdict else EXIT_FAIL


# -- selftest --------------------------------------------------------------------

Check = Tuple[str, Callable[[], Tuple[bool, str]]]


def _check_identities() -> Tuple[bool, str]:
    rng = random.Random(20240601)
    for n in (2, 3, 4, 5, 8):
        for _ in range(2000):
            pt = exponents.random_admissible_point(rng, n)
            if n == 2:
                lhs, rhs = exponents.sigma(pt), exponents.s2(pt) - Fraction(1, 2) + pt.inv_q
            else:
                lhs = exponents.d_exponent(pt)
                rhs = exponents.s_n(pt) - Fraction(n - 1, 2) + pt.inv_q
            if lhs != rhs:
                return False, f"n={n} at {pt}: {lhs} != {rhs} (tolerance: exact)"
    return True, "10000 points exact"


def _check_vertices() -> Tuple[bool, str]:
    for n in range(3, 13):
        ip0, iq0, s0 = exponents.smoothing_endpoint(n)
        B = exponents.figure1_vertices(n)["B"]
        if B != (ip0, iq0) or exponents.s_n(ExponentPoint(ip0, iq0, n)) != s0:
            return False, f"n={n}: B={B} vs ({ip0}, {iq0})"
    return True, "n=3..12 exact"


def _check_quadrangle() -> Tuple[bool, str]:
    rng = random.Random(7)
    Q = exponents.quadrangle_Q(3)
    inside = outside = 0
    while inside < 200 or outside < 200:
        pt = exponents.random_admissible_point(rng, 3, max_den=211)
        if Q.contains(pt, closed=False) and inside < 200:
            inside += 1
            if exponents.d_exponent(pt) >= 0:
                return False, f"d >= 0 inside Q at {pt}"
        elif not Q.contains(pt, closed=True) and outside < 200:
            outside += 1
            if exponents.sigma(pt) <= 0:
                return False, f"sigma <= 0 outside Q at {pt}"
    return True, "200 + 200 points"


def _check_gamma() -> Tuple[bool, str]:
    g2 = complex(specfun.gamma(2 + 4j))
    g3 = complex(specfun.gamma(3 + 4j))
    err = max(abs(g3 - (2 + 4j) * g2) / abs(g3), abs(specfun.gamma(0.5) - math.sqrt(math.pi)) / math.sqrt(math.pi))
    return err <= 1e-12, f"relative error {err:.2e} (tolerance 1e-12)"


def _check_bessel() -> Tuple[bool, str]:
    r = np.geomspace(0.05, 1e4, 400)
    exact = np.sqrt(2 / (np.pi * r)) * np.sin(r)
    err1 = float(np.max(np.abs(specfun.bessel_j(0.5, r) - exact) / specfun.bessel_envelope(0.5, r)))
    rr = np.linspace(0.5, 60, 200)
    worst = 0.0
    for beta in (0.3, 2.0, 1.5 + 2j, -0.7 + 0.5j):
        lhs = specfun.bessel_j(beta - 1, rr) + specfun.bessel_j(beta + 1, rr)
        rhs = 2 * beta / rr * specfun.bessel_j(beta, rr)
        scale = specfun.bessel_envelope(beta + 1, rr) + np.abs(rhs)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    ok = err1 <= 1e-10 and worst <= 1e-8
    return ok, f"closed form {err1:.2e} (tol 1e-10), recurrence {worst:.2e} (tol 1e-8)"


def _check_expansion() -> Tuple[bool, str]:
    r = 2.0 ** np.arange(3, 10)
    res = specfun.expansion_residual(0.0, 3, r)
    slope = float(np.polyfit(np.log2(r), np.log2(res), 1)[0])
    exact = float(np.max(specfun.expansion_residual(0.5, 1, r)))
    ok = slope <= -3.5 + 0.3 and exact <= 1e-14
    return ok, f"beta=0 N=3 slope {slope:.3f} (tol <= -3.2), beta=1/2 residual {exact:.1e} (tol 1e-14)"


def _check_field() -> Tuple[bool, str]:
    spec = GridSpec(2, 128, 8.0)
    f = GridField.from_function(spec, lambda x, y: np.exp(-np.pi * (x * x + y * y)) * (1 + 0.3 * x))
    fh = f.to_frequency()
    back = fh.to_space()
    rt = float(np.linalg.norm(back.samples - f.samples) / np.linalg.norm(f.samples))
    l2_space = field.lebesgue_norm(f, 2)
    l2_freq = math.sqrt(float(np.sum(np.abs(fh.samples) ** 2)) / spec.box_length ** 2)
    pars = abs(l2_space - l2_freq) / l2_space
    g = GridField.from_function(spec, lambda x, y: np.exp(-np.pi * (x * x + y * y)))
    gerr = float(np.max(np.abs(g.to_frequency().samples - np.exp(-np.pi * spec.frequency_modulus() ** 2))))
    ok = rt <= 1e-12 and pars <= 1e-12 and gerr <= 1e-8
    return ok, f"round trip {rt:.1e}, Parseval {pars:.1e} (tol 1e-12), Gaussian {gerr:.1e} (tol 1e-8)"


def _check_operators() -> Tuple[bool, str]:
    e1 = max(abs(operators.spherical_multiplier(n, 1, 0.0) - operators.ball_volume(n)) for n in (2, 3))
    r = np.linspace(0.1, 100, 2000)
    e2 = float(np.max(np.abs(operators.spherical_multiplier(3, 0, r) - np.sin(2 * np.pi * r) / r)))
    spec = GridSpec(2, 64, 8.0)
    rng = np.random.default_rng(1)
    f = GridField(spec, rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape))
    n0 = field.lebesgue_norm(f, 2)
    w = operators.half_wave(operators.half_wave(f, 0.3), 0.45)
    w1 = operators.half_wave(f, 0.75)
    unit = abs(field.lebesgue_norm(w1, 2) - n0) / n0
    group = float(np.linalg.norm(w.samples - w1.samples) / np.linalg.norm(w1.samples))
    slopes = [operators.residual_decay_slope(2, a, 3, 4.0) for a in (0, 1j)]
    ok = e1 <= 1e-8 and e2 <= 1e-8 and unit <= 1e-10 and group <= 1e-10 and max(slopes) <= -3.2
    return ok, (f"vol {e1:.1e}, sinc {e2:.1e} (tol 1e-8), unitarity {unit:.1e}, group {group:.1e} (tol 1e-10), "
                f"decomposition slopes {slopes[0]:.2f}, {slopes[1]:.2f} (tol <= -3.2)")


SELFTEST_CHECKS: List[Check] = [
    ("exponents.identities", _check_identities),
    ("exponents.vertex_B", _check_vertices),
    ("exponents.quadrangle", _check_quadrangle),
    ("specfun.gamma", _check_gamma),
    ("specfun.bessel", _check_bessel),
    ("specfun.expansion_residual", _check_expansion),
    ("field.transforms", _check_field),
    ("operators.invariants", _check_operators),
]


@contextlib.contextmanager
def _mutation(name: Optional[str]):
    """Deliberate faults, used to show that the self-test notices them."""
    if name is None:
        yield
        return
    if name == "s2-middle":
        original = exponents.s2_branch_value

        def perturbed(point, branch):
            v = original(point, branch)
            return v + Fraction(1, 10 ** 6) if branch == 2 else v

        with mock.patch.object(exponents, "s2_branch_value", perturbed):
            yield
        return
    if name == "hankel-phase":
        original = specfun.hankel_coefficients

        def wrong_phase(beta, N):
            c = original(beta, N)
            b = (c.b[0] * 1j,) + tuple(c.b[1:])
            return specfun.AsymptoticCoefficients(c.order, c.N, b, c.d)

        with mock.patch.object(specfun, "hankel_coefficients", wrong_phase):
            yield
        return
    raise CliError(f"unknown mutation {name!r}")


def run_selftest(mutation: Optional[str] = None, out=None) -> List[Tuple[str, bool, str]]:
    out = out if out is not None else sys.stdout
    results = []
    with _mutation(mutation):
        for name, fn in SELFTEST_CHECKS:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crashing check is a failing check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            results.append((name, ok, detail))
            out.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail} [{time.perf_counter() - t0:.2f}s]\n")
    return results


def cmd_selftest(args) -> int:
    results = run_selftest(args.mutate)
    failed = [r for r in results if not r[1]]
    sys.stdout.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
    return EXIT_OK if not failed else EXIT_FAIL


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sphmax", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"sphmax {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("exponents", help="exact exponent tables and region geometry")
    e.add_argument("--n", type=int, required=True)
    g = e.add_mutually_exclusive_group()
    g.add_argument("--point", action="append", help="reciprocal exponents '1/p,1/q' as num/den (repeatable)")
    g.add_argument("--grid-density", type=int, default=8, help="tabulate (a/K, b/K) with b <= a")
    g.add_argument("--figure1", action="store_true", help="emit vertices and region polygons as JSON")
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--out")
    e.set_defaults(func=cmd_exponents)

    m = sub.add_parser("multiplier", help="radial samples of the multiplier")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--alpha", default="0+0i")
    m.add_argument("--kind", choices=("spherical_mean", "surface_mean"), default="spherical_mean")
    m.add_argument("--rmin", type=float, default=0.0)
    m.add_argument("--rmax", type=float, default=8.0)
    m.add_argument("--samples", type=int, default=64)
    m.add_argument("--decompose", nargs=2, metavar=("N", "M"))
    m.add_argument("--out")
    m.set_defaults(func=cmd_multiplier)

    a = sub.add_parser("apply", help="apply a radial multiplier to a stored field")
    a.add_argument("--input", required=True)
    a.add_argument("--output", required=True)
    a.add_argument("--kind", default="spherical_mean",
                   choices=("spherical_mean", "surface_mean", "half_wave", "bracket_power"))
    a.add_argument("--alpha", default="0+0i")
    a.add_argument("--t", type=float, default=1.0)
    a.add_argument("--sign", type=int, choices=(1, -1), default=1)
    a.add_argument("--power", type=float, default=0.0)
    a.add_argument("--representation", choices=("space", "frequency"), default="space")
    a.add_argument("--dtype", choices=("complex64", "complex128"), default="complex128")
    a.add_argument("--profile", help="also write a radial-profile CSV")
    a.set_defaults(func=cmd_apply)

    x = sub.add_parser("maximal", help="max over t in [tmin, tmax] of |M^alpha_t f|")
    x.add_argument("--input", required=True)
    x.add_argument("--output", required=True)
    x.add_argument("--alpha", default="0+0i")
    x.add_argument("--tmin", type=float, default=1.0)
    x.add_argument("--tmax", type=float, default=2.0)
    x.add_argument("--t-samples", type=int, default=33)
    x.add_argument("--dtype", choices=("complex64", "complex128"), default="complex128")
    x.add_argument("--profile")
    x.set_defaults(func=cmd_maximal)

    r = sub.add_parser("experiment", help="run a scaling experiment")
    r.add_argument("--config", help="JSON config; flags override its keys")
    r.add_argument("--out-dir", default="results")
    r.add_argument("--name", help="file stem for outputs (default: family)")
    for key, typ in _CONFIG_FLAGS:
        r.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
    r.add_argument("--j-range", dest="j_range", type=int, nargs=2, default=None)
    r.set_defaults(func=cmd_experiment)

    s = sub.add_parser("selftest", help="run the built-in invariant checks")
    s.add_argument("--mutate", choices=("s2-middle", "hankel-phase"), default=None,
                   help="inject a deliberate fault to confirm it is caught")
    s.set_defaults(func=cmd_selftest)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
