"""Restricted isometry constants, l_p decoders and recovery-error estimates."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import comb

from ._rng import stream
from .ellipsoid import extremal_sparse_witness, quasi_norm

log = logging.getLogger(__name__)

ENUMERATION_BUDGET = 10**6


class DecodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class RipEstimate:
    s: int
    delta: float
    method: str
    supports_checked: int


def _support_deltas(A, supports):
    """max(|lambda_max - 1|, |1 - lambda_min|) of A_S^T A_S for a batch of supports."""
    S = np.asarray(supports)
    As = A[:, S].transpose(1, 2, 0)  # (K, s, n)
    w = np.linalg.eigvalsh(As @ As.transpose(0, 2, 1))
    return np.maximum(np.abs(w[:, -1] - 1.0), np.abs(1.0 - w[:, 0]))


def _max_delta(A, supports_iter, chunk=4096):
    best = 0.0
    count = 0
    while True:
        batch = list(itertools.islice(supports_iter, chunk))
        if not batch:
            return best, count
        best = max(best, float(np.max(_support_deltas(A, batch))))
        count += len(batch)


def rip_exact(A, s, budget=ENUMERATION_BUDGET):
    """Restricted isometry constant of order s by enumerating all supports."""
    A = np.asarray(A, dtype=float)
    m = A.shape[1]
    if int(s) != s or not 1 <= s <= m:
        raise ValueError(f"need 1 <= s <= m = {m}, got s={s}")
    total = int(comb(m, s, exact=True))
    if total > budget:
        raise ValueError(f"C({m},{s}) = {total} supports exceed the budget {budget}; use rip_lower_mc")
    delta, count = _max_delta(A, itertools.combinations(range(m), int(s)))
    return RipEstimate(int(s), delta, "exact_enumeration", count)


def rip_lower_mc(A, s, trials, seed=0):
    """Lower estimate of delta_s from ``trials`` distinct random supports.

    If ``trials`` covers all C(m, s) supports they are enumerated instead,
    which gives the exact constant.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[1]
    s = int(s)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    total = int(comb(m, s, exact=True))
    if trials >= total:
        delta, count = _max_delta(A, itertools.combinations(range(m), s))
        return RipEstimate(s, delta, "random_support_lower", count)
    rng = stream(seed, s)
    seen = set()
    draws = 0
    while len(seen) < trials and draws < 50 * trials:
        seen.add(tuple(sorted(rng.choice(m, size=s, replace=False).tolist())))
        draws += 1
    delta, count = _max_delta(A, iter(sorted(seen)))
    return RipEstimate(s, delta, "random_support_lower", count)


@dataclass
class DecodeResult:
    z: np.ndarray = field(repr=False)
    objective: float
    residual: float
    iterations: int
    converged: bool
    non_unique: bool = False
    history: list = field(default_factory=list, repr=False)


def decode_l1(N, y, check_unique=True):
    """Basis pursuit: min |z|_1 subject to N z = y.

    Solved as a linear program in (z+, z-) by the HiGHS dual simplex, which
    returns a vertex of the optimal face.  ``non_unique`` is set when
    maximizing or minimizing a random functional over the optimal face moves
    away from that vertex.
    """
    N = np.atleast_2d(np.asarray(N, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n, m = N.shape
    A_eq = np.hstack([N, -N])
    c = np.ones(2 * m)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=(0, None), method="highs-ds")
    if res.status == 2:
        raise DecodeError("measurements are not in the range of N")
    if res.status != 0:
        raise DecodeError(f"linear program failed: {res.message}")
    z = res.x[:m] - res.x[m:]
    obj = float(np.sum(np.abs(z)))
    non_unique = False
    if check_unique:
        # the optimal face is a point iff a generic functional has equal max and min on it
        w = stream(0, m, n).standard_normal(m)
        scale = 1e-6 * max(1.0, float(np.max(np.abs(z))))
        for sign in (1.0, -1.0):
            res2 = linprog(
                sign * np.concatenate([w, -w]),
                A_ub=c[None, :],
                b_ub=[obj * (1 + 1e-9) + 1e-12],
                A_eq=A_eq,
                b_eq=y,
                bounds=(0, None),
                method="highs-ds",
            )
            if res2.status == 0 and np.max(np.abs(res2.x[:m] - res2.x[m:] - z)) > scale:
                non_unique = True
                break
    resid = float(np.linalg.norm(N @ z - y))
    return DecodeResult(z, obj, resid, int(res.nit), resid <= 1e-7 * max(1.0, np.linalg.norm(y)), non_unique)


def decode_lp_irls(N, y, p, eps_schedule=None, iters=60, tol=1e-10):
    """Heuristic l_p minimization (0 < p < 1) by iteratively reweighted least squares.

    Each iterate is the weighted minimum-norm solution of N z = y with
    weights (z_j^2 + eps^2)^{p/2 - 1}, so every iterate is feasible.  eps
    runs through ``eps_schedule`` (relative to max|z_init|, default
    1e-1 ... 1e-9).  The best iterate in |z|_p is returned; ``history``
    records the running best objective, which therefore never increases.
    The problem is non-convex and the result is not certified optimal.
    """
    if not 0 < p < 1:
        raise ValueError(f"need 0 < p < 1, got p={p}")
    N = np.atleast_2d(np.asarray(N, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if eps_schedule is None:
        eps_schedule = 10.0 ** -np.arange(1, 10)
    z, *_ = np.linalg.lstsq(N, y, rcond=None)
    if np.linalg.norm(N @ z - y) > 1e-8 * max(1.0, np.linalg.norm(y)):
        raise DecodeError("measurements are not in the range of N")
    scale = max(float(np.max(np.abs(z))), 1e-300)
    best = z.copy()
    best_obj = quasi_norm(z, p) if z.size else 0.0
    history = [best_obj]
    it = 0
    for eps in eps_schedule:
        e2 = (eps * scale) ** 2
        for _ in range(iters):
            winv = (z * z + e2) ** (1.0 - p / 2)  # inverse weights
            NW = N * winv
            try:
                lam = np.linalg.solve(NW @ N.T, y)
            except np.linalg.LinAlgError:
                lam, *_ = np.linalg.lstsq(NW @ N.T, y, rcond=None)
            z_new = winv * (N.T @ lam)
            it += 1
            change = np.linalg.norm(z_new - z)
            z = z_new
            obj = quasi_norm(z, p)
            if obj < best_obj:
                best, best_obj = z.copy(), obj
            history.append(best_obj)
            if change <= tol * max(1.0, np.linalg.norm(z)) + math.sqrt(e2) * 1e-3:
                break
    resid = float(np.linalg.norm(N @ best - y))
    return DecodeResult(best, best_obj, resid, it, resid <= 1e-7 * max(1.0, np.linalg.norm(y)), history=history)


def decode_lp(N, y, p):
    """Delta_p(y): basis pursuit for p = 1, IRLS for p < 1."""
    if p == 1:
        return decode_l1(N, y, check_unique=False)
    return decode_lp_irls(N, y, p)


@dataclass(frozen=True)
class QuasiConstants:
    """C_K with K + K in C_K K, and C_X with |x+y|_X <= C_X (|x|_X + |y|_X).

    For E_{p,sigma} the p-triangle inequality gauge(x+y)^p <= gauge(x)^p +
    gauge(y)^p gives C_K = 2^{1/p} for p <= 1 (and C_K = 2 for convex
    bodies); for l_q it gives C_X = 2^{(1/q - 1)_+}.
    """

    C_K: float
    C_X: float

    @classmethod
    def for_bodies(cls, p, q):
        ck = 2.0 ** (1.0 / p) if p < 1 else 2.0
        cx = 2.0 ** max(1.0 / q - 1.0, 0.0) if not math.isinf(q) else 1.0
        return cls(ck, cx)


def lemma32_sandwich(radius_value, C_X, C_K):
    """Bounds (radius / C_X, C_K radius) on the optimal worst-case recovery error."""
    return radius_value / C_X, C_K * radius_value


def gaussian_rip_condition(n, m, s, C1=1.0):
    """n >= C1 s log(e m / s)."""
    return n >= C1 * s * math.log(math.e * m / s)


def calibrate_rip_c1(n, m, delta=1.0 / 3.0, trials=20, supports=500, quantile=0.9, seed=0, s_max=None):
    """Empirical C1 for the Gaussian RIP condition (reported, not asserted).

    Finds the largest s for which a fraction ``quantile`` of normalized
    Gaussian n x m matrices have a (lower-estimated) delta_s <= ``delta`` and
    returns ``(s, C1 = n / (s log(e m / s)))``.  Returns ``(0, inf)`` if even
    s = 1 fails.
    """
    s_max = n if s_max is None else s_max
    best = 0
    for s in range(1, s_max + 1):
        ok = 0
        for t in range(trials):
            A = stream(seed, t).standard_normal((n, m)) / math.sqrt(n)
            if rip_lower_mc(A, s, supports, seed=seed + t).delta <= delta:
                ok += 1
        if ok < quantile * trials:
            break
        best = s
    if best == 0:
        return 0, math.inf
    return best, n / (best * math.log(math.e * m / best))


# ---------------------------------------------------------------------------
# recovery-radius proxy


@dataclass
class RecoveryProbe:
    value: float
    max_error: float
    worst: np.ndarray = field(repr=False)
    probes: int = 0
    errors: np.ndarray = field(default=None, repr=False)


def _probe_vectors(E, probe_count, rng, axis_count):
    m = E.m
    P = []
    for s in range(1, m // 2 + 1):
        w = extremal_sparse_witness(E, s)
        P.append(w)
        signs = rng.choice((-1.0, 1.0), size=m)
        P.append(w * signs)
    for j in range(min(axis_count, m)):
        e = np.zeros(m)
        e[j] = E.sigma[j]
        P.append(e)
    for _ in range(probe_count):
        g = rng.standard_normal(m)
        # random boundary point with decaying profile
        x = g * E.sigma
        P.append(x / E.gauge(x))
    return P


def recovery_radius_upper(E, N, q=2.0, probe_count=32, seed=0, axis_count=32, decoder=None, keys=()):
    """Empirical proxy for 2^{1/q} sup_{x in E} |x - Delta_p(N x)|_q.

    The supremum is replaced by a maximum over probe vectors: the
    equal-entry boundary vectors on the first 2s coordinates for every
    1 <= s <= m/2 (with and without random signs), scaled axis vectors
    sigma_j e_j and random boundary points.  The decoder is Delta_p with the
    ellipsoid's p.  This is a lower estimate of the quantity, not a certified
    bound.
    """
    p = E.p
    if not 0 < p <= 1:
        raise ValueError(f"need 0 < p <= 1, got p={p}")
    if not p < q <= 2:
        raise ValueError(f"need p < q <= 2, got q={q}")
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if decoder is None:
        def decoder(y):
            return decode_lp(N, y, p).z
    rng = stream(seed, *keys, 104729)
    probes = _probe_vectors(E, probe_count, rng, axis_count)
    errs = np.empty(len(probes))
    for i, x in enumerate(probes):
        z = decoder(N @ x)
        errs[i] = quasi_norm(x - z, q)
    i = int(np.argmax(errs))
    return RecoveryProbe(2.0 ** (1.0 / q) * float(errs[i]), float(errs[i]), probes[i], len(probes), errs)
