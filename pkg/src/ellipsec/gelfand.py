"""Gelfand numbers of diagonal operators, minimal radii and decay exponents.

Conventions: ``sigma`` is a non-increasing positive sequence, indices are
one-based as in c_n, and the minimal radius over codimension-n sections is
rad(E, n) = c_{n+1}(D_sigma : l_p^m -> l_2^m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ellipsoid import Ellipsoid, Semiaxes, dual_exponent, inv, quasi_norm


def _sigma(sigma):
    if isinstance(sigma, Ellipsoid):
        return sigma.sigma
    if isinstance(sigma, Semiaxes):
        return sigma.sigma
    return Semiaxes(sigma).sigma


def _r_exponent(p, q):
    """r with 1/r = (1/q - 1/p)_+ (inf when it vanishes)."""
    t = max(inv(q) - inv(p), 0.0)
    return math.inf if t == 0 else 1.0 / t


@dataclass(frozen=True)
class GelfandQuery:
    sigma: np.ndarray = field(repr=False)
    p: float
    q: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "sigma", _sigma(self.sigma))
        if int(self.n) != self.n or not 1 <= self.n <= self.sigma.size:
            raise ValueError(f"need 1 <= n <= m = {self.sigma.size}, got n={self.n}")

    @property
    def m(self):
        return self.sigma.size


def gelfand_exact_tail(query):
    """c_n(D_sigma: l_p^m -> l_q^m) = ||(sigma_j)_{j >= n}||_r for q <= p.

    1/r = 1/q - 1/p, and r = inf (the value sigma_n) when q = p.
    """
    if query.q > query.p:
        raise ValueError(f"exact tail formula needs q <= p, got p={query.p}, q={query.q}")
    return quasi_norm(query.sigma[query.n - 1 :], _r_exponent(query.p, query.q))


def operator_norm(sigma, p, q):
    """||D_sigma: l_p^m -> l_q^m|| = ||sigma||_r with 1/r = (1/q - 1/p)_+."""
    return quasi_norm(_sigma(sigma), _r_exponent(p, q))


@dataclass(frozen=True)
class MinRadius:
    """Minimal radius over codimension-n sections.

    ``exact`` is set for p >= 2.  Otherwise ``lower`` is the certified floor
    sigma_{n+1} (n+1)^{1/2-1/p} (every codimension-n subspace meets the span
    of the first n+1 axes), ``upper`` is the theorem-shape value named by
    ``upper_source`` (constants as configured, not certified) and
    ``certified_upper`` = sigma_{n+1}, valid since E_p is inside E_2 for p <= 2.
    """

    exact: float | None
    lower: float
    upper: float | None
    upper_source: str
    certified_upper: float | None = None


def _coordinate_floor(sigma, p, n):
    return float(sigma[n]) * (n + 1) ** (0.5 - inv(p)) if p < 2 else float(sigma[n])


def min_radius(E, n, lam=None, C=1.0, D=1.0, k_fraction=0.25):
    """rad(E, n) = c_{n+1}(D_sigma: l_p^m -> l_2^m), exactly when known."""
    m = E.m
    if int(n) != n or not 0 <= n < m:
        raise ValueError(f"need 0 <= n < m = {m}, got n={n}")
    n = int(n)
    sigma = E.sigma
    if E.p >= 2:
        v = gelfand_exact_tail(GelfandQuery(sigma, E.p, 2.0, n + 1))
        return MinRadius(v, v, v, "exact_tail", v)
    lower = _coordinate_floor(sigma, E.p, n)
    if n == 0:
        v = float(sigma[0])
        return MinRadius(v, v, v, "operator_norm", v)
    cert = float(sigma[n])
    if E.p >= 1:
        upper, _ = gelfand_upper_thmA(sigma, E.p, n, m, C=C, k_fraction=k_fraction)
        return MinRadius(None, lower, upper, "theorem_A", cert)
    if lam is not None:
        qb = gelfand_upper_quasi(lam, E.p, 2.0, n, m, C=C, D=D)
        return MinRadius(None, lower, qb.value, "quasi_banach" if qb.condition_ok else "trivial", cert)
    return MinRadius(None, lower, None, "none", cert)


def split_index(p, n, k_fraction=0.25):
    """Split index k of the upper bound.

    p = 1: k = max(1, floor(k_fraction n)).  p > 1: k = max(1,
    floor(2 k_fraction n / p*)), so that p = 2 with the default fraction gives
    k = floor(n/4).
    """
    if p == 1:
        return max(1, int(math.floor(k_fraction * n)))
    return max(1, int(math.floor(2.0 * k_fraction * n / dual_exponent(p))))


def gelfand_upper_thmA(sigma, p, n, m=None, C=1.0, k_fraction=0.25):
    """Upper bound shape for the radius of a random codimension-n section.

    p = 1:  C n^{-1/2} max_{k <= j <= m} sigma_j sqrt(log j + 1)
    p > 1:  C sqrt(p*) n^{-1/2} (sum_{j=k}^m sigma_j^{p*})^{1/p*}

    Returns ``(value, k_used)``.
    """
    s = _sigma(sigma)
    m = s.size if m is None else int(m)
    if m != s.size:
        raise ValueError(f"m={m} does not match len(sigma)={s.size}")
    if p < 1:
        raise ValueError("gelfand_upper_thmA needs p >= 1; see gelfand_upper_quasi")
    if int(n) != n or not 1 <= n < m:
        raise ValueError(f"need 1 <= n < m = {m}, got n={n}")
    k = min(split_index(p, n, k_fraction), m)
    tail = s[k - 1 :]
    if p == 1:
        j = np.arange(k, m + 1)
        return C * float(np.max(tail * np.sqrt(np.log(j) + 1.0))) / math.sqrt(n), k
    ps = dual_exponent(p)
    return C * math.sqrt(ps) * quasi_norm(tail, ps) / math.sqrt(n), k


@dataclass(frozen=True)
class QuasiBound:
    value: float
    condition_ok: bool
    exponent: float

    def __iter__(self):
        yield self.value
        yield self.condition_ok


def gelfand_upper_quasi(lam, p, q, n, m, C=1.0, D=1.0):
    """C (log(e m / n) / n)^{lam + 1/p - 1/q} when n >= D log(e m / n), else sigma_1 = 1.

    For sigma_j = j^{-lam}, 0 < p <= 1 and p < q <= 2.
    """
    if not 0 < p <= 1:
        raise ValueError(f"need 0 < p <= 1, got p={p}")
    if not p < q <= 2:
        raise ValueError(f"need p < q <= 2, got p={p}, q={q}")
    if not lam > 0:
        raise ValueError(f"need lam > 0, got {lam}")
    if not 1 <= n < m:
        raise ValueError(f"need 1 <= n < m, got n={n}, m={m}")
    L = math.log(math.e * m / n)
    expo = lam + 1.0 / p - 1.0 / q
    if n >= D * L:
        return QuasiBound(C * (L / n) ** expo, True, expo)
    return QuasiBound(1.0, False, expo)


# ---------------------------------------------------------------------------
# decay exponents for sigma_j = j^{-lam}

REGIONS = ("above_threshold", "below_threshold", "boundary", "useless", "open_case")


@dataclass(frozen=True)
class DecayReport:
    """Polynomial decay rates of the minimal and the random-section radius.

    ``random_decay`` is None where the rate is not known (``region`` is
    ``boundary`` or ``open_case``).  ``minimal_decay`` is None for p < 1.
    """

    p: float
    lam: float
    minimal_decay: float | None
    random_decay: float | None
    region: str
    log_caveat: bool = False
    quasi: bool = False

    @property
    def region_code(self):
        return REGIONS.index(self.region)


def decay_exponents(p, lam):
    """Classify (p, lam) and return the decay rates of optimal and random information."""
    p = float(p)
    lam = float(lam)
    if not p > 0 or not lam > 0:
        raise ValueError(f"need p > 0 and lam > 0, got p={p}, lam={lam}")
    if p < 1:
        return DecayReport(p, lam, None, lam + 1.0 / p - 0.5, "above_threshold", log_caveat=True, quasi=True)
    ip = inv(p)
    inv_ps = 1.0 - ip
    useless_line = max(0.5 - ip, 0.0)
    if lam <= useless_line:
        return DecayReport(p, lam, 0.0, 0.0, "useless")
    if p < 2 and lam < inv_ps:
        minimal = lam / (2.0 * inv_ps)
    else:
        minimal = lam + ip - 0.5
    if lam > inv_ps:
        return DecayReport(p, lam, minimal, lam + ip - 0.5, "above_threshold", log_caveat=(p == 1))
    # lam <= 1/p* from here on
    if p <= 2 and lam < inv_ps:
        return DecayReport(p, lam, minimal, 0.0, "below_threshold")
    if p < 2:
        return DecayReport(p, lam, minimal, None, "boundary")
    if lam <= 0.5:
        return DecayReport(p, lam, minimal, 0.0, "below_threshold")
    return DecayReport(p, lam, minimal, None, "open_case")


def lorentz_decay_exponent(p, q, r):
    """1/u such that sigma in l_{r,t} iff (c_n(D_sigma: l_p -> l_q)) in l_{u,t}.

    Returns None on the boundary lines where the equivalence is not known.
    """
    p, q, r = float(p), float(q), float(r)
    if not (1 <= p and 1 <= q):
        raise ValueError(f"need 1 <= p, q <= inf, got p={p}, q={q}")
    ir, ip, iq = inv(r), inv(p), inv(q)
    if not ir > max(iq - ip, 0.0):
        raise ValueError(f"need 1/r > (1/q - 1/p)_+, got 1/r={ir}")
    if q <= p:
        return ir + ip - iq
    inv_ps = 1.0 - ip
    if p < 2 and q <= 2:
        thr = inv_ps * (ip - iq) / (ip - 0.5)
    elif p < 2:
        thr = inv_ps
    else:
        return ir
    if math.isclose(ir, thr, rel_tol=1e-12, abs_tol=1e-15):
        return None
    if ir < thr:
        # only reachable for p > 1, where p* is finite
        return ir / (2.0 * inv_ps)
    return ir + ip - iq
