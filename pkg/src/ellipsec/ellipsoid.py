"""Geometry of l_p-ellipsoids.

The body ``E_{p,sigma}^m = {x : ||(x_j / sigma_j)_j||_p <= 1}`` for
``0 < p <= inf`` and semiaxes ``sigma_1 >= ... >= sigma_m > 0``.  For
``p < 1`` the body is not convex but is still the unit ball of a quasi-norm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MEMBERSHIP_RTOL = 1e-9


def _as_vector(x, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def _check_exponent(p):
    p = float(p)
    if not p > 0:
        raise ValueError(f"exponent must be positive, got {p}")
    return p


def dual_exponent(p):
    """Hoelder conjugate p* of p >= 1 (p*=inf for p=1, p*=1 for p=inf)."""
    p = _check_exponent(p)
    if p < 1:
        raise ValueError(f"dual exponent undefined for p={p} < 1")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def inv(p):
    """1/p with the convention 1/inf = 0."""
    return 0.0 if math.isinf(p) else 1.0 / p


@dataclass(frozen=True)
class ExponentP:
    """An exponent p in (0, inf] together with the quantities derived from it."""

    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", _check_exponent(self.p))

    @property
    def quasi(self):
        return self.p < 1

    @property
    def dual(self):
        return dual_exponent(self.p)

    @property
    def tail_exponent(self):
        """s with 1/s = (1/2 - 1/p)_+ (inf when the positive part vanishes)."""
        t = max(0.5 - inv(self.p), 0.0)
        return math.inf if t == 0 else 1.0 / t

    def __float__(self):
        return self.p


def quasi_norm(x, p):
    """The l_p (quasi-)norm, evaluated with the max modulus factored out.

    >>> quasi_norm([3.0, 4.0], 2)
    5.0
    """
    x = _as_vector(x)
    p = _check_exponent(p)
    if x.size == 0:
        return 0.0
    a = np.abs(x)
    top = a.max()
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return float(top)
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


def _rows_quasi_norm(a, p):
    """Row-wise quasi_norm of a non-negative 2-D array (no validation)."""
    top = a.max(axis=-1)
    if math.isinf(p):
        return top
    safe = np.where(top > 0, top, 1.0)
    return np.where(top > 0, safe * np.sum((a / safe[..., None]) ** p, axis=-1) ** (1.0 / p), 0.0)


@dataclass(frozen=True)
class Semiaxes:
    """Non-increasing positive semiaxes sigma_1 >= ... >= sigma_m > 0."""

    sigma: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = _as_vector(self.sigma, "sigma").copy()
        if s.size == 0:
            raise ValueError("semiaxes must be non-empty")
        if np.any(s <= 0):
            raise ValueError("semiaxes must be positive")
        if np.any(np.diff(s) > 0):
            raise ValueError("semiaxes must be non-increasing")
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.sigma.size

    def __repr__(self):
        return f"Semiaxes(m={self.sigma.size}, sigma_1={self.sigma[0]:.6g}, sigma_m={self.sigma[-1]:.6g})"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sigma"])
            for v in self.sigma:
                w.writerow([f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path):
        """Read a single-column CSV; a non-numeric first row is taken as header."""
        values = []
        with open(Path(path), newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or not row[0].strip():
                    continue
                try:
                    values.append(float(row[0]))
                except ValueError:
                    if i == 0:
                        continue
                    raise
        return cls(np.array(values))


def polynomial_semiaxes(m, lam):
    """sigma_j = j^(-lam) for j = 1..m."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if not lam > 0:
        raise ValueError(f"decay exponent must be positive, got {lam}")
    return Semiaxes(np.arange(1, int(m) + 1, dtype=float) ** (-float(lam)))


@dataclass(frozen=True)
class Ellipsoid:
    """The l_p-ellipsoid with exponent ``p`` and semiaxes ``sigma``."""

    p: float
    sigma: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "p", _check_exponent(self.p))
        sigma = self.sigma.sigma if isinstance(self.sigma, Semiaxes) else Semiaxes(self.sigma).sigma
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def polynomial(cls, p, m, lam):
        return cls(p, polynomial_semiaxes(m, lam))

    @classmethod
    def ball(cls, p, m, radius=1.0):
        return cls(p, np.full(m, float(radius)))

    @property
    def m(self):
        return self.sigma.size

    @property
    def exponent(self):
        return ExponentP(self.p)

    def gauge(self, x):
        return ellipsoid_gauge(x, self)

    def contains(self, x, rtol=MEMBERSHIP_RTOL):
        return self.gauge(x) <= 1.0 + rtol

    def support(self, u):
        return support_function(self, u)

    def circumradius(self):
        """Euclidean circumradius of the whole body (the n = 0 section)."""
        if self.p <= 2:
            return float(self.sigma[0])
        return quasi_norm(self.sigma, self.exponent.tail_exponent)

    def __repr__(self):
        return f"Ellipsoid(p={self.p:g}, m={self.m}, sigma_1={self.sigma[0]:.6g}, sigma_m={self.sigma[-1]:.6g})"


def ellipsoid_gauge(x, E):
    """Minkowski gauge ||(x_j / sigma_j)_j||_p of ``x`` with respect to ``E``."""
    x = _as_vector(x)
    if x.size != E.m:
        raise ValueError(f"dimension mismatch: x has {x.size} entries, ellipsoid has m={E.m}")
    return quasi_norm(x / E.sigma, E.p)


def gauge_rows(X, E):
    """Gauge of every row of a 2-D array (vectorized, no validation)."""
    return _rows_quasi_norm(np.abs(X) / E.sigma, E.p)


def support_function(E, u):
    """Support function h_E(u) = sup_{y in E} <u, y>.

    For p >= 1 this is the dual norm ||(sigma_j u_j)_j||_{p*}.  For p < 1 the
    body is not convex, but a linear functional has the same supremum over a
    set and over its convex hull.  The convex hull of E_{p,sigma} is the
    scaled cross-polytope conv{+-sigma_j e_j}, so h_E(u) = max_j sigma_j |u_j|.
    """
    u = _as_vector(u, "u")
    if u.size != E.m:
        raise ValueError(f"dimension mismatch: u has {u.size} entries, ellipsoid has m={E.m}")
    if E.p <= 1:
        return float(np.max(E.sigma * np.abs(u)))
    return quasi_norm(E.sigma * u, dual_exponent(E.p))


def support_rows(E, U):
    """support_function evaluated on every row of ``U``."""
    a = np.abs(U) * E.sigma
    if E.p <= 1:
        return a.max(axis=-1)
    return _rows_quasi_norm(a, dual_exponent(E.p))


def lorentz_norm(x, p, t):
    """Lorentz (quasi-)norm ||x||_{p,t} = || j^(1/p - 1/t) x*_j ||_t.

    ``x*`` is the non-increasing rearrangement of the moduli.  For ``t == p``
    the weights are identically one and the plain l_p norm is returned.
    """
    x = _as_vector(x)
    p = _check_exponent(p)
    t = _check_exponent(t)
    if p == t:
        return quasi_norm(x, p)
    xs = np.sort(np.abs(x))[::-1]
    j = np.arange(1, xs.size + 1, dtype=float)
    return quasi_norm(j ** (inv(p) - inv(t)) * xs, t)


def best_s_term_error(x, s, p):
    """Error of best s-term approximation sigma_s(x)_p (hard thresholding)."""
    x = _as_vector(x)
    if int(s) != s or not 0 <= s <= x.size:
        raise ValueError(f"s must be an integer in [0, {x.size}], got {s}")
    xs = np.sort(np.abs(x))[::-1]
    return quasi_norm(xs[int(s):], p)


def extremal_sparse_witness(E, s):
    """Boundary point of ``E`` with equal entries on the first 2s coordinates.

    This is the vector that makes the best s-term error over the ellipsoid
    large; its gauge is exactly one.
    """
    if int(s) != s or s < 1 or 2 * s > E.m:
        raise ValueError(f"need 1 <= s <= m/2 = {E.m / 2}, got s={s}")
    k = 2 * int(s)
    c = 1.0 / quasi_norm(1.0 / E.sigma[:k], E.p)
    x = np.zeros(E.m)
    x[:k] = c
    return x


@dataclass(frozen=True)
class SparseApproximationReport:
    s: int
    lower: float
    upper: float
    scale: float

    @property
    def lower_constant(self):
        return self.lower / self.scale

    @property
    def upper_constant(self):
        return self.upper / self.scale


def sparse_approximation_report(E, s, lam=None):
    """Two-sided numbers for sup_{x in E} sigma_s(x)_p.

    ``lower`` is attained by :func:`extremal_sparse_witness`.  ``upper`` uses
    x*_k <= (sum_{j<=k} sigma_j^{-p})^{-1/p}, valid for every x in E.  When
    ``lam`` is given both are also reported relative to s^{-lam}.
    """
    w = extremal_sparse_witness(E, s)
    lower = best_s_term_error(w, s, E.p)
    cum = np.cumsum((1.0 / E.sigma) ** E.p) if not math.isinf(E.p) else None
    if cum is None:
        # p = inf: x*_k <= sigma_k
        upper = float(E.sigma[s]) if s < E.m else 0.0
    else:
        upper = quasi_norm(cum[s:] ** (-1.0 / E.p), E.p) if s < E.m else 0.0
    scale = float(s) ** (-lam) if lam is not None else 1.0
    return SparseApproximationReport(int(s), lower, upper, scale)
