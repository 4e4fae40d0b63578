"""Experiment drivers: built-in problems, error measurement and sweeps.

Every sweep returns a :class:`ConvergenceRecord` that serializes to CSV
(``sweep,size,h,error,kappa2,wall_ms``) and to a JSON mirror carrying
the configuration, so a run can be reloaded and compared byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import galerkin
from .errors import InvalidArgumentError
from .geometry import fibonacci_nodes, icosahedral_frequency, icosahedral_nodes, load_points
from .lagrange import build_global_basis, build_local_basis, interpolate
from .quadrature import compute_weights, gauss_product_rule, load_rule, save_rule

logger = logging.getLogger(__name__)

CSV_HEADER = ("sweep", "size", "h", "error", "kappa2", "wall_ms")


# --------------------------------------------------------------------------
# problems


def _ones(p):
    return np.ones(len(p))


def _exp_z(p):
    return np.exp(np.atleast_2d(p)[:, 2])


def _f1(p):
    z = np.atleast_2d(p)[:, 2]
    # -Lap e^z = -e^z (1 - z^2 - 2z); plus u gives e^z (z^2 + 2z)
    return np.exp(z) * (z * z + 2.0 * z)


def _a2(p):
    return 1.0 - 0.5 * np.atleast_2d(p)[:, 2]


def _f2(p):
    z = np.atleast_2d(p)[:, 2]
    return (-0.5 * (z**3 + z**2 - 5.0 * z + 1.0) + 1.0) * np.exp(z)


def builtin_problem(pid):
    """Problem 1: ``-Lap u + u = f``; problem 2: ``-div(a grad u) + u = f``
    with ``a = 1 - z/2``.  Both have ``u = exp(z)``, ``z = cos(theta)``."""
    if pid in (1, "1"):
        return galerkin.PDEProblem(_ones, _ones, _f1, _exp_z, 1.0, 1.0, "problem1")
    if pid in (2, "2"):
        return galerkin.PDEProblem(_a2, _ones, _f2, _exp_z, 0.5, 1.0, "problem2")
    raise InvalidArgumentError(f"unknown problem id {pid!r} (expected 1 or 2)")


def _xyz(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def pde_residual(problem, n_lat=512, n_lon=1024):
    """Max of ``|-div(a grad u) + b u - f|`` on a latitude-longitude grid.

    The operator is discretized in flux form with central differences in
    ``(theta, phi)`` at cell centres, and the steps ``d`` and ``2d`` are
    combined by Richardson extrapolation (fourth order).
    """
    if problem.exact_u is None:
        raise InvalidArgumentError("problem has no exact solution")
    dt0, dp0 = math.pi / n_lat, 2 * math.pi / n_lon
    th = (np.arange(n_lat) + 0.5) * dt0
    ph = np.arange(n_lon) * dp0
    T, P = np.meshgrid(th, ph, indexing="ij")

    def ev(fn, t, p):
        return fn(_xyz(t, p).reshape(-1, 3)).reshape(t.shape)

    u, a = problem.exact_u, problem.a
    u0 = ev(u, T, P)

    def div_flux(dt, dp):
        ap, am = ev(a, T + dt / 2, P), ev(a, T - dt / 2, P)
        ft = (np.sin(T + dt / 2) * ap * (ev(u, T + dt, P) - u0)
              - np.sin(T - dt / 2) * am * (u0 - ev(u, T - dt, P))) / (dt * dt * np.sin(T))
        bp, bm = ev(a, T, P + dp / 2), ev(a, T, P - dp / 2)
        fp = (bp * (ev(u, T, P + dp) - u0) - bm * (u0 - ev(u, T, P - dp))) / (
            dp * dp * np.sin(T) ** 2
        )
        return ft + fp

    div = (4.0 * div_flux(dt0, dp0) - div_flux(2 * dt0, 2 * dp0)) / 3.0
    res = -div + ev(problem.b, T, P) * u0 - ev(problem.f, T, P)
    return float(np.max(np.abs(res)))


# --------------------------------------------------------------------------
# error measurement and rate fits


def evaluation_rule(n_points=62_500):
    """Gauss-Legendre x trapezoid product rule with about ``n_points`` nodes.

    Exact for band-limited integrands far beyond the degrees reached by
    the test solutions, and independent of the kernel machinery.
    """
    n_lat = max(2, int(round(math.sqrt(n_points / 2.0))))
    return gauss_product_rule(n_lat, 2 * n_lat, label=f"eval{2 * n_lat * n_lat}")


def relative_l2_error(sol, problem, E):
    """``sqrt(Q_E((u_h - u)^2) / Q_E(u^2))``.

    ``sol`` is anything callable on an ``(n, 3)`` array (a Galerkin
    solution, an interpolant) or an array of values at ``E``.
    """
    u = problem if callable(problem) else problem.exact_u
    if u is None:
        raise InvalidArgumentError("problem has no exact solution")
    pts = E.points
    exact = u(pts)
    approx = np.asarray(sol, dtype=float) if not callable(sol) else sol(pts)
    if np.ndim(approx) == 0:
        approx = np.full_like(exact, float(approx))
    return math.sqrt(E.apply((approx - exact) ** 2) / E.apply(exact**2))


class FitResult(NamedTuple):
    slope: float
    residual: float


def fit_rate(h, errors=None):
    """Least-squares slope of ``log error`` against ``log h``.

    Accepts either a list of ``(h, error)`` pairs or two sequences.  The
    residual is the RMS deviation of the log-log fit.
    """
    if errors is None:
        pairs = list(h)
        h = [p[0] for p in pairs]
        errors = [p[1] for p in pairs]
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.ndim != 1:
        raise InvalidArgumentError("h and errors must be 1-d and equally long")
    if len(h) < 3:
        raise InvalidArgumentError("rate fit needs at least three points")
    if np.any(e <= 0) or np.any(h <= 0) or not np.all(np.isfinite(e)):
        raise InvalidArgumentError("rate fit needs positive finite h and errors")
    x, y = np.log(h), np.log(e)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    dev = y - A @ coef
    return FitResult(float(coef[0]), float(np.sqrt(np.mean(dev**2))))


# Bands for the fitted rates, keyed by sweep.  They are shape checks on raw
# log-log slopes (no log factors removed), not the theoretical exponents,
# whose constants depend on smoothness parameters that are not runtime data.
RATE_BANDS = {
    "N_Y": (4.0, None),      # error vs N_Y^(-1/2), fixed X, m=3, M=2
    "interp": (3.5, None),   # L2 interpolation error vs h_X, m=2
    "cond": (1.5, 2.5),      # d log kappa / d log(1/q_X)
}


def rate_in_band(record):
    """``True``/``False`` against :data:`RATE_BANDS`, ``None`` if no band or rate."""
    band = RATE_BANDS.get(record.sweep)
    if band is None or record.rate is None:
        return None
    lo, hi = band
    return record.rate >= lo and (hi is None or record.rate <= hi)


# --------------------------------------------------------------------------
# configuration and records


@dataclass
class ExperimentConfig:
    """One sweep definition.  ``x_source``/``y_source`` name a generator
    (``fibonacci``, ``icosahedral``) or a directory/list of point files."""

    problem: int = 1
    m: int = 3
    M: int = 2
    x_source: str = "fibonacci"
    x_sizes: list = field(default_factory=lambda: [961])
    y_source: str = "icosahedral"
    y_sizes: list = field(default_factory=lambda: [2562, 10242, 23042, 40962])
    basis: str = "global"
    K: float = 7.0
    truncate: bool = False
    n_eval: int = 62_500
    kappa: bool = True
    interp_target: str = "exp_z"
    output: str | None = None
    threads: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.x_sizes = [int(s) for s in self.x_sizes]
        self.y_sizes = [int(s) for s in self.y_sizes]
        if self.m < 2 or self.M < 2:
            raise InvalidArgumentError("kernel orders m and M must be >= 2")
        if self.basis not in ("global", "local"):
            raise InvalidArgumentError("basis must be 'global' or 'local'")
        if not self.K > 0:
            raise InvalidArgumentError("K must be positive")
        for name in ("x_sizes", "y_sizes"):
            s = getattr(self, name)
            if any(b <= a for a, b in zip(s, s[1:])):
                raise InvalidArgumentError(f"{name} must be strictly increasing")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class StepResult:
    sweep: str
    size: int
    h: float
    error: float
    kappa2: float
    wall_ms: float
    info: dict = field(default_factory=dict)


@dataclass
class ConvergenceRecord:
    sweep: str
    steps: list = field(default_factory=list)
    rate: float | None = None
    rate_residual: float | None = None
    config: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def main_steps(self):
        return [s for s in self.steps if s.sweep == self.sweep]

    @property
    def sizes(self):
        return [s.size for s in self.main_steps()]

    @property
    def errors(self):
        return [s.error for s in self.main_steps()]

    @property
    def kappas(self):
        return [s.kappa2 for s in self.main_steps()]

    @property
    def hs(self):
        return [s.h for s in self.main_steps()]

    def fit(self, value="error", include=None):
        """Fit the rate of ``value`` against ``h`` over included steps."""
        steps = [s for s in self.main_steps() if s.info.get("fit", True)]
        if include is not None:
            steps = [s for s in steps if include(s)]
        if len(steps) < 3:
            self.rate, self.rate_residual = None, None
            return None
        r = fit_rate([s.h for s in steps], [getattr(s, value) for s in steps])
        self.rate, self.rate_residual = r
        return r

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in self.steps:
            w.writerow([s.sweep, s.size, repr(float(s.h)), repr(float(s.error)),
                        repr(float(s.kappa2)), repr(float(s.wall_ms))])
        return buf.getvalue()

    def to_json(self):
        d = asdict(self)
        return json.dumps(d, indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["steps"] = [StepResult(**s) for s in d["steps"]]
        return cls(**d)

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != CSV_HEADER:
            raise InvalidArgumentError("unexpected CSV header")
        steps = [StepResult(r[0], int(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]))
                 for r in rows[1:]]
        return cls(steps[0].sweep if steps else "", steps)

    def write(self, path, deterministic=False):
        """Write ``<path>.csv`` and ``<path>.json`` atomically.

        With ``deterministic`` the wall times are zeroed so repeated
        runs give identical bytes.
        """
        path = Path(path)
        rec = self
        if deterministic:
            rec = ConvergenceRecord(
                self.sweep,
                [StepResult(s.sweep, s.size, s.h, s.error, s.kappa2, 0.0, s.info) for s in self.steps],
                self.rate, self.rate_residual, self.config, self.info,
            )
        base = path.with_suffix("") if path.suffix in (".csv", ".json") else path
        out = []
        for suffix, text in ((".csv", rec.to_csv()), (".json", rec.to_json())):
            target = base.with_name(base.name + suffix)
            atomic_write(target, text)
            out.append(target)
        return out

    def summary_lines(self):
        for s in self.steps:
            yield (f"{s.sweep} size={s.size} h={s.h:.4g} error={s.error:.4g} "
                   f"kappa2={s.kappa2:.4g} time={s.wall_ms / 1000:.2f}s")
        if self.rate is not None:
            line = f"{self.sweep} rate={self.rate:.3f} fit_residual={self.rate_residual:.3g}"
            band = RATE_BANDS.get(self.sweep)
            if band is not None:
                hi = "" if band[1] is None else f"..{band[1]}"
                line += f" band={band[0]}{hi} in_band={rate_in_band(self)}"
            yield line


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# point sets and rule cache


def node_set(source, n):
    """Point set of (about) ``n`` nodes from a generator name or a file.

    For ``icosahedral`` the size must be ``10 f^2 + 2``.  A directory
    source is searched for ``<n>.txt``; a file source is loaded as is.
    """
    if source == "fibonacci":
        return fibonacci_nodes(n)
    if source == "icosahedral":
        return icosahedral_nodes(frequency=icosahedral_frequency(n))
    p = Path(source)
    if p.is_dir():
        p = p / f"{n}.txt"
    if not p.exists():
        raise InvalidArgumentError(f"no point file for {source!r}, size {n}")
    X = load_points(p)
    if len(X) != n:
        raise InvalidArgumentError(f"{p} has {len(X)} points, expected {n}")
    return X


class RuleCache:
    """Quadrature rules keyed by node set and order, in memory and
    optionally on disk (``directory``)."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._mem = {}

    def get(self, Y, M):
        key = (Y.label, len(Y), M)
        if key in self._mem:
            return self._mem[key]
        rule = None
        if self.directory is not None:
            f = self.directory / f"{Y.label}_{len(Y)}_M{M}.rule"
            if f.exists():
                rule = load_rule(f, Y.label)
                if rule.points.shape != Y.points.shape or not np.allclose(rule.points, Y.points, rtol=0, atol=1e-14):
                    rule = None
        if rule is None:
            rule = compute_weights(Y, M)
            if self.directory is not None:
                self.directory.mkdir(parents=True, exist_ok=True)
                save_rule(rule, self.directory / f"{Y.label}_{len(Y)}_M{M}.rule")
        self._mem[key] = rule
        return rule


def rule_for(source, n, M, cache=None):
    Y = node_set(source, n)
    return cache.get(Y, M) if cache is not None else compute_weights(Y, M)


def make_basis(X, config, cache=None):
    """Basis for ``X`` per ``config``; ``cache`` (a dict) reuses earlier builds."""
    key = (X.label, len(X), config.m, config.basis, config.K if config.basis == "local" else None)
    if cache is not None and key in cache:
        return cache[key]
    if config.basis == "local":
        basis = build_local_basis(X, config.m, config.K, workers=config.threads)
    else:
        basis = build_global_basis(X, config.m)
    if cache is not None:
        cache[key] = basis
    return basis


def solve_once(basis, rule, problem, config, E, kappa=None):
    """Assemble, (optionally) truncate and solve; returns a dict of results."""
    A, f_t = galerkin.assemble(basis, rule, problem)
    if config.truncate:
        A = galerkin.truncate(A, basis.X, config.K)
    sol = galerkin.solve(A, f_t, basis)
    err = relative_l2_error(sol, problem, E)
    want_kappa = config.kappa if kappa is None else kappa
    k = galerkin.condition_number(A) if want_kappa else float("nan")
    return {"solution": sol, "matrix": A, "error": err, "kappa2": k}


# --------------------------------------------------------------------------
# sweeps


def _need(sizes, what):
    if len(sizes) < 3:
        raise InvalidArgumentError(f"{what} sweep needs at least three sizes")


def sweep_quadrature(config, cache=None, E=None, basis=None):
    """Fixed ``X`` (first of ``x_sizes``), varying ``Y``.

    Steps use ``h_Y = N_Y^{-1/2}``.  Steps whose measured ``h_Y`` exceeds
    ``q_X`` are kept in the record but left out of the rate fit.
    """
    _need(config.y_sizes, "quadrature")
    problem = builtin_problem(config.problem)
    E = E or evaluation_rule(config.n_eval)
    X = node_set(config.x_source, config.x_sizes[0])
    q_X = X.metrics().separation_radius
    basis = basis or make_basis(X, config)
    rec = ConvergenceRecord("N_Y", config=config.to_dict())
    for n in config.y_sizes:
        t0 = time.perf_counter()
        rule = rule_for(config.y_source, n, config.M, cache)
        r = solve_once(basis, rule, problem, config, E)
        ms = 1000 * (time.perf_counter() - t0)
        h_meas = rule.metrics.mesh_norm
        rec.steps.append(StepResult("N_Y", len(rule), len(rule) ** -0.5, r["error"], r["kappa2"], ms,
                                    {"h_Y_measured": h_meas, "fit": bool(h_meas <= q_X),
                                     "residual": r["solution"].residual}))
        logger.info("N_X=%d N_Y=%d error=%.3e", len(X), len(rule), r["error"])
    rec.info = {"N_X": len(X), "q_X": q_X}
    rec.fit()
    return rec


def sweep_centers(config, cache=None, E=None, bases=None):
    """Fixed ``Y`` (first of ``y_sizes``), varying ``X``; ``h`` is the
    measured mesh norm of ``X``."""
    _need(config.x_sizes, "center")
    problem = builtin_problem(config.problem)
    E = E or evaluation_rule(config.n_eval)
    rule = rule_for(config.y_source, config.y_sizes[0], config.M, cache)
    rec = ConvergenceRecord("N_X", config=config.to_dict())
    for n in config.x_sizes:
        t0 = time.perf_counter()
        X = node_set(config.x_source, n)
        met = X.metrics()
        r = solve_once(make_basis(X, config, bases), rule, problem, config, E)
        ms = 1000 * (time.perf_counter() - t0)
        rec.steps.append(StepResult("N_X", n, met.mesh_norm, r["error"], r["kappa2"], ms,
                                    {"q_X": met.separation_radius}))
    rec.info = {"N_Y": len(rule)}
    rec.fit()
    return rec


_TARGETS = {"exp_z": _exp_z}


def sweep_interpolation(config, E=None, target=None):
    """L2 error of the ``phi_m`` interpolant against ``h_X`` (measured)."""
    _need(config.x_sizes, "interpolation")
    f = target or _TARGETS[config.interp_target]
    E = E or evaluation_rule(config.n_eval)
    rec = ConvergenceRecord("interp", config=config.to_dict())
    for n in config.x_sizes:
        t0 = time.perf_counter()
        X = node_set(config.x_source, n)
        s = interpolate(X, config.m, f(X.points))
        err = relative_l2_error(s, f, E)
        ms = 1000 * (time.perf_counter() - t0)
        rec.steps.append(StepResult("interp", n, X.metrics().mesh_norm, err, float("nan"), ms))
    rec.fit()
    return rec


def condition_study(config, cache=None, bases=None):
    """``kappa_2(A^Y)`` over ``x_sizes`` at the first ``Y``; extra
    ``cond-y`` steps repeat each ``X`` for the remaining ``Y`` sizes.

    The reported rate is the slope of ``log kappa`` against
    ``log(1/q_X)``; ``h`` holds ``q_X``.
    """
    _need(config.x_sizes, "condition")
    problem = builtin_problem(config.problem)
    rules = [rule_for(config.y_source, n, config.M, cache) for n in config.y_sizes]
    rec = ConvergenceRecord("cond", config=config.to_dict())
    for n in config.x_sizes:
        X = node_set(config.x_source, n)
        q = X.metrics().separation_radius
        basis = make_basis(X, config, bases)
        for j, rule in enumerate(rules):
            t0 = time.perf_counter()
            A = galerkin.assemble_stiffness(basis, rule, problem)
            if config.truncate:
                A = galerkin.truncate(A, X, config.K)
            k = galerkin.condition_number(A)
            ms = 1000 * (time.perf_counter() - t0)
            rec.steps.append(StepResult("cond" if j == 0 else "cond-y", n, q, float("nan"), k, ms,
                                        {"N_Y": len(rule)}))
    fit = rec.fit(value="kappa2")
    if fit is not None:
        rec.rate = -fit.slope
    rec.info = {"N_Y": [len(r) for r in rules], "rate_definition": "d log kappa / d log(1/q_X)"}
    return rec


def kappa_sensitivity(record):
    """Per ``N_X``: max relative change of ``kappa_2`` across the ``Y`` sizes."""
    out = {}
    for n in sorted({s.size for s in record.steps}):
        ks = [s.kappa2 for s in record.steps if s.size == n]
        out[n] = (max(ks) - min(ks)) / ks[0]
    return out
