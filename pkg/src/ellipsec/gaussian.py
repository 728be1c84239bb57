"""Gaussian constants, mean width estimates and the escape-through-a-mesh bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._rng import gaussian_blocks
from .ellipsoid import (
    _as_vector,
    dual_exponent,
    gauge_rows,
    quasi_norm,
    support_rows,
)

# Two-sided constants for E||(b_j g_j)||_inf ~ sup_j b*_j sqrt(log j + 1).
# These are not taken from any source; they are wide enough to bracket the
# expectation for every b we have checked by Monte Carlo.
KHINTCHINE_INF_LOW = 0.2
KHINTCHINE_INF_HIGH = 3.0


def a_k(k):
    """E||g||_2 for a standard Gaussian g in R^k, i.e. sqrt(2) Gamma((k+1)/2) / Gamma(k/2)."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = float(k)
    return math.sqrt(2.0) * math.exp(gammaln((k + 1) / 2) - gammaln(k / 2))


def gamma_q(q):
    """(E|g|^q)^(1/q) for a standard Gaussian g, q >= 1."""
    q = float(q)
    if not q >= 1 or math.isinf(q):
        raise ValueError(f"q must be a finite real >= 1, got {q}")
    log_moment = 0.5 * q * math.log(2.0) + gammaln((q + 1) / 2) - 0.5 * math.log(math.pi)
    return math.exp(log_moment / q)


def khintchine_bounds(b, q, c_low=KHINTCHINE_INF_LOW, c_high=KHINTCHINE_INF_HIGH):
    """Lower and upper bounds for E||(b_j g_j)_j||_q.

    For finite q the bounds are gamma_1 ||b||_q and gamma_q ||b||_q.  For
    q = inf they are c_low * S and c_high * S with
    S = sup_j b*_j sqrt(log j + 1), b* the non-increasing rearrangement of |b|.
    """
    b = _as_vector(b, "b")
    q = float(q)
    if math.isinf(q):
        bs = np.sort(np.abs(b))[::-1]
        if bs.size == 0:
            return 0.0, 0.0
        j = np.arange(1, bs.size + 1)
        S = float(np.max(bs * np.sqrt(np.log(j) + 1.0)))
        return c_low * S, c_high * S
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    nb = quasi_norm(b, q)
    return gamma_q(1) * nb, gamma_q(q) * nb


def _mc_mean(values_iter):
    """Mean and standard error from an iterator of 1-D sample blocks."""
    n = 0
    s = 0.0
    ss = 0.0
    for v in values_iter:
        n += v.size
        s += float(v.sum())
        ss += float(np.dot(v, v))
    mean = s / n
    var = max(ss / n - mean * mean, 0.0)
    se = math.sqrt(var / (n - 1)) if n > 1 else math.inf
    return mean, se


def gaussian_norm_mc(k, samples, seed):
    """Monte Carlo estimate of E||g||_2 in R^k, returned as (mean, std_error)."""
    return _mc_mean(np.linalg.norm(G, axis=1) for G in gaussian_blocks(seed, samples, k))


def weighted_norm_mc(b, q, samples, seed):
    """Monte Carlo estimate of E||(b_j g_j)_j||_q, returned as (mean, std_error)."""
    b = _as_vector(b, "b")
    a = np.abs(b)

    def blocks():
        for G in gaussian_blocks(seed, samples, b.size):
            X = np.abs(G) * a
            if math.isinf(q):
                yield X.max(axis=1)
            else:
                yield np.sum(X**q, axis=1) ** (1.0 / q)

    return _mc_mean(blocks())


@dataclass(frozen=True)
class MeanWidthEstimate:
    value: float
    std_error: float
    samples: int
    seed: int
    rho: float = math.inf

    def csv_row(self):
        return {
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
            "seed": self.seed,
        }


def cor25_bound(E):
    """Shape of E sup_{y in E} <g, y> with constant 1.

    sqrt(p*) ||sigma||_{p*} for p > 1 and sup_j sigma_j sqrt(log j + 1) for
    p <= 1 (for p < 1 the supremum equals the one over the convex hull, which
    is the p = 1 body).
    """
    if E.p <= 1:
        j = np.arange(1, E.m + 1)
        return float(np.max(E.sigma * np.sqrt(np.log(j) + 1.0)))
    ps = dual_exponent(E.p)
    return math.sqrt(ps) * quasi_norm(E.sigma, ps)


def expected_sup_ellipsoid(E, samples, seed):
    """Monte Carlo E sup_{y in E} <g, y> and the constant-one shape bound.

    Each sample is evaluated exactly through the support function.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    mean, se = _mc_mean(support_rows(E, G) for G in gaussian_blocks(seed, samples, E.m))
    return MeanWidthEstimate(mean, se, int(samples), int(seed)), cor25_bound(E)


# ---------------------------------------------------------------------------
# support function of the rounded body E ∩ rho B_2


def _weighted_ball_projection(Z, E, iters=100):
    """Euclidean projection of every row of Z onto E (p >= 1).

    Rows already inside are returned unchanged.  For 1 <= p < inf the
    projection has the form y_j = sign(z_j) t_j(beta) with a scalar
    multiplier beta >= 0 found by bisection; the returned rows are taken at
    the feasible end of the bracket, so their gauge never exceeds one.
    """
    sigma = E.sigma
    p = E.p
    if math.isinf(p):
        return np.clip(Z, -sigma, sigma)
    A = np.abs(Z)
    out = Z.copy()
    outside = gauge_rows(Z, E) > 1.0
    if not np.any(outside):
        return out
    A = A[outside]

    if p == 1:
        def coords(beta):
            return np.maximum(A - beta[:, None] / sigma, 0.0)
        hi = np.max(A * sigma, axis=1)
    elif p == 2:
        def coords(beta):
            return A / (1.0 + 2.0 * beta[:, None] / sigma**2)
        hi = np.ones(A.shape[0])
    else:
        sp = sigma**p

        def coords(beta):
            # root of t + c t^(p-1) = a on [0, a]; Newton kept inside the bracket
            c = beta[:, None] * p / sp
            lo_t = np.zeros_like(A)
            hi_t = A.copy()
            t = 0.5 * A
            for _ in range(100):
                tp = t ** (p - 2) if p != 2 else 1.0
                phi = t + c * tp * t - A
                lo_t = np.where(phi <= 0, t, lo_t)
                hi_t = np.where(phi >= 0, t, hi_t)
                with np.errstate(divide="ignore", invalid="ignore"):
                    step = t - phi / (1.0 + c * (p - 1) * tp)
                ok = (step > lo_t) & (step < hi_t)
                t_new = np.where(ok, step, 0.5 * (lo_t + hi_t))
                if np.all(np.abs(t_new - t) <= 1e-15 * (A + 1e-300)):
                    t = t_new
                    break
                t = t_new
            # feasible side: the smaller end keeps the gauge below one
            return np.minimum(t, hi_t)
        hi = np.ones(A.shape[0])

    def g(beta):
        return gauge_rows(coords(beta), E)

    while True:
        bad = g(hi) > 1.0
        if not np.any(bad):
            break
        hi = np.where(bad, 2.0 * hi, hi)
    lo = np.zeros_like(hi)
    for _ in range(iters):
        if np.all(hi - lo <= 1e-15 * hi):
            break
        mid = 0.5 * (lo + hi)
        inside = g(mid) <= 1.0
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
    out[outside] = np.sign(Z[outside]) * coords(hi)
    return out


def _support_maximizer(E, U):
    """A maximizer of <u, y> over E for every row u of U (p >= 1).

    Where the maximizer is not unique the one of least Euclidean norm is
    chosen when it is cheap to do so (p = inf with zero coordinates).
    """
    sigma = E.sigma
    p = E.p
    if math.isinf(p):
        return np.sign(U) * sigma
    if p == 1:
        Y = np.zeros_like(U)
        j = np.argmax(np.abs(U) * sigma, axis=1)
        r = np.arange(U.shape[0])
        Y[r, j] = np.sign(U[r, j]) * sigma[j]
        return Y
    ps = dual_exponent(p)
    W = np.abs(U) * sigma
    top = W.max(axis=1, keepdims=True)
    top = np.where(top > 0, top, 1.0)
    Wn = W / top
    nrm = np.sum(Wn**ps, axis=1, keepdims=True) ** (1.0 / ps)
    nrm = np.where(nrm > 0, nrm, 1.0)
    return np.sign(U) * sigma * (Wn / nrm) ** (ps - 1.0)


def support_rows_intersection(E, rho, U, tol=1e-10, max_iter=200):
    """Row-wise support function of E ∩ rho B_2, see :func:`support_function_intersection`."""
    if E.p < 1:
        raise ValueError("the rounded body is only supported for p >= 1 (convex case)")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    U = np.atleast_2d(np.asarray(U, dtype=float))
    unorm = np.linalg.norm(U, axis=1)
    hE = support_rows(E, U)
    out = np.minimum(hE, rho * unorm)
    # E inside the ball along the maximizing point
    YE = _support_maximizer(E, U)
    done = (np.linalg.norm(YE, axis=1) <= rho) | (unorm == 0)
    out[done] = hE[done]
    # ball inside E along the direction u
    safe = np.where(unorm > 0, unorm, 1.0)
    ball_ok = ~done & (gauge_rows(rho * U / safe[:, None], E) <= 1.0)
    out[ball_ok] = rho * unorm[ball_ok]
    todo = ~done & ~ball_ok
    if not np.any(todo):
        return out

    # Both constraints active.  y(alpha) = proj_E(u / alpha) maximizes
    # <u, y> - alpha |y|^2 / 2 over E; its norm decreases in alpha and the
    # optimum is y(alpha*) with |y(alpha*)| = rho.
    Ut = U[todo]
    hi = unorm[todo] / rho  # projection does not increase the norm
    lo = hi.copy()

    def y_of(alpha):
        return _weighted_ball_projection(Ut / alpha[:, None], E)

    for _ in range(1100):
        big = np.linalg.norm(y_of(lo), axis=1) > rho
        if np.all(big):
            break
        lo = np.where(big, lo, 0.5 * lo)
    else:
        raise FloatingPointError("could not bracket the multiplier of the ball constraint")
    v_hi = np.sum(Ut * y_of(hi), axis=1)
    v_lo = np.sum(Ut * y_of(lo), axis=1)
    for _ in range(max_iter):
        if np.all(v_lo - v_hi <= tol):
            break
        mid = np.sqrt(lo * hi)
        Y = y_of(mid)
        feas = np.linalg.norm(Y, axis=1) <= rho
        v = np.sum(Ut * Y, axis=1)
        hi = np.where(feas, mid, hi)
        v_hi = np.where(feas, v, v_hi)
        lo = np.where(feas, lo, mid)
        v_lo = np.where(feas, v_lo, v)
    out[todo] = v_hi
    return out


def support_function_intersection(E, rho, u, tol=1e-10):
    """Support function of the rounded body E ∩ rho B_2 at ``u`` (p >= 1).

    Equal to inf_v { h_E(v) + rho |u - v|_2 }.  The value is computed as
    <u, y> for an explicit feasible point y (gauge <= 1, |y|_2 <= rho), so it
    never exceeds the true support value and is within ``tol`` of it.
    """
    u = _as_vector(u, "u")
    if u.size != E.m:
        raise ValueError(f"dimension mismatch: u has {u.size} entries, ellipsoid has m={E.m}")
    return float(support_rows_intersection(E, rho, u[None, :], tol=tol)[0])


def mean_width_rounded(E, rho, samples, seed, tol=1e-10):
    """Monte Carlo mean width M*(E ∩ rho B_2), normalized by a_m.

    With the normalization E sup_{t in K} <t, g> / a_m the unit ball has mean
    width exactly one.
    """
    am = a_k(E.m)
    mean, se = _mc_mean(
        support_rows_intersection(E, rho, G, tol=tol) / am for G in gaussian_blocks(seed, samples, E.m)
    )
    return MeanWidthEstimate(mean, se, int(samples), int(seed), float(rho))


def mstar_bound(E, rho, k, sharp=False):
    """Upper bound shape for M*(E ∩ rho B_2), split at index k.

    Default (constant one):
      p = 1:  m^{-1/2} (rho sqrt(k) + max_{k<j<=m} sigma_j sqrt(log j + 1))
      p > 1:  sqrt(p*) m^{-1/2} (rho sqrt(k) + ||(sigma_j)_{j>k}||_{p*})

    With ``sharp=True`` the bound before asymptotics is returned,
    (rho a_k + gamma_{p*} ||(sigma_j)_{j>k}||_{p*}) / a_m, which is a true
    upper bound for p > 1 under the a_m normalization of the mean width.
    For p = 1 the tail term then uses KHINTCHINE_INF_HIGH.
    """
    m = E.m
    if int(k) != k or not 0 <= k < m:
        raise ValueError(f"k must be an integer in [0, m) = [0, {m}), got {k}")
    if E.p < 1:
        raise ValueError("mstar_bound needs p >= 1")
    k = int(k)
    tail = E.sigma[k:]
    if E.p == 1:
        j = np.arange(k + 1, m + 1)
        tail_term = float(np.max(tail * np.sqrt(np.log(j) + 1.0)))
        if sharp:
            head = rho * a_k(k) if k > 0 else 0.0
            return (head + KHINTCHINE_INF_HIGH * tail_term) / a_k(m)
        return (rho * math.sqrt(k) + tail_term) / math.sqrt(m)
    ps = dual_exponent(E.p)
    tail_term = quasi_norm(tail, ps)
    if sharp:
        head = rho * a_k(k) if k > 0 else 0.0
        return (head + gamma_q(ps) * tail_term) / a_k(m)
    return math.sqrt(ps) * (rho * math.sqrt(k) + tail_term) / math.sqrt(m)


@dataclass(frozen=True)
class EscapeBound:
    """Outcome of the escape-through-a-mesh bound for E ∩ rho B_2.

    ``radius_bound`` bounds the radius of the rounded body's section.  It
    carries over to E itself when ``transfers`` is set: either the ball does
    not cut E, or the bound is below rho (a set whose intersection with rho B_2
    has radius < rho has radius < rho).
    """

    radius_bound: float
    success_prob: float
    transfers: bool

    def __iter__(self):
        yield self.radius_bound
        yield self.success_prob


def escape_probability(n):
    """1 - 3.5 exp(-a_n^2 / 72), clamped to [0, 1]."""
    return min(max(1.0 - 3.5 * math.exp(-a_k(n) ** 2 / 72.0), 0.0), 1.0)


def escape_bound(E, rho, k, n, sharp=False):
    """Radius bound 2 (a_m / a_n) M*-bound for a uniformly random codimension-n section."""
    m = E.m
    if int(n) != n or not 1 <= n < m:
        raise ValueError(f"need 1 <= n < m = {m}, got n={n}")
    bound = 2.0 * a_k(m) / a_k(int(n)) * mstar_bound(E, rho, k, sharp=sharp)
    transfers = rho >= E.circumradius() or bound < rho
    return EscapeBound(bound, escape_probability(int(n)), bool(transfers))
