"""Random subspaces and circumradii of sections of l_p-ellipsoids."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from ._rng import pmap, stream
from .ellipsoid import gauge_rows

log = logging.getLogger(__name__)

# relative pivot size below which an information matrix counts as rank deficient
RANK_RTOL = 1e-12


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class InfoMatrix:
    """An n x m information matrix with the keys it was drawn from."""

    entries: np.ndarray = field(repr=False)
    seed: int = 0
    keys: tuple = ()

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def m(self):
        return self.entries.shape[1]


def sample_gaussian_info(n, m, seed, *keys):
    """Gaussian n x m matrix drawn from the stream keyed by (seed, *keys).

    Entries are filled row by row, so for fixed keys the first n rows do not
    depend on n: appending rows gives nested kernels.
    """
    if int(n) != n or int(m) != m or not 1 <= n < m:
        raise ValueError(f"need integers 1 <= n < m, got n={n}, m={m}")
    G = stream(seed, *keys).standard_normal((int(n), int(m)))
    return InfoMatrix(G, int(seed), tuple(int(k) for k in keys))


@dataclass(frozen=True)
class Subspace:
    """A subspace of R^m given by a column-orthonormal basis."""

    basis: np.ndarray = field(repr=False)
    codim: int

    @property
    def m(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def residual(self, x):
        """Euclidean distance of x to the subspace."""
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.basis @ (self.basis.T @ x)))

    def orthonormality_residual(self):
        return float(np.max(np.abs(self.basis.T @ self.basis - np.eye(self.dim)), initial=0.0))

    def __repr__(self):
        return f"Subspace(m={self.m}, dim={self.dim}, codim={self.codim})"


def _entries(N):
    return N.entries if isinstance(N, InfoMatrix) else np.atleast_2d(np.asarray(N, dtype=float))


def kernel_basis(N):
    """Orthonormal basis of ker N from a complete QR factorization of N^T."""
    A = _entries(N)
    n, m = A.shape
    if n >= m:
        raise ValueError(f"need n < m, got {A.shape}")
    Q, R = sla.qr(A.T, mode="full")
    diag = np.abs(np.diag(R))
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    if np.any(diag <= RANK_RTOL * scale * m):
        raise RankDeficientError(f"information matrix of shape {A.shape} is rank deficient")
    return Subspace(np.ascontiguousarray(Q[:, n:]), n)


def coordinate_tail_subspace(m, n):
    """span{e_{n+1}, ..., e_m}."""
    if not 0 <= n < m:
        raise ValueError(f"need 0 <= n < m, got n={n}, m={m}")
    return Subspace(np.eye(m)[:, n:], n)


@dataclass
class RadiusEstimate:
    """Circumradius estimate with a boundary witness in the subspace.

    ``value`` is |witness|_2 for a witness of gauge one, hence a lower bound
    on the radius for every method; it is exact for ``exact_p2``.
    """

    value: float
    method: str
    witness: np.ndarray = field(repr=False)
    restarts: int = 0
    converged: bool = True

    def witness_gauge(self, E):
        return E.gauge(self.witness)


def _boundary(E, x):
    g = E.gauge(x)
    return x / g if g > 0 else x


def radius_p2_exact(E, S):
    """Exact radius of a section of an ordinary (p = 2) ellipsoid.

    The radius is 1 / sqrt(lambda_min(B^T Sigma^{-2} B)) for an orthonormal
    basis B of the subspace.
    """
    if E.p != 2:
        raise ValueError(f"radius_p2_exact needs p = 2, got p={E.p}")
    if S.dim == 0:
        return RadiusEstimate(0.0, "exact_p2", np.zeros(E.m))
    C = S.basis / E.sigma[:, None]
    w, v = sla.eigh(C.T @ C, subset_by_index=[0, 0])
    x = _boundary(E, S.basis @ v[:, 0])
    return RadiusEstimate(float(1.0 / math.sqrt(w[0])), "exact_p2", x)


# ---------------------------------------------------------------------------
# general p: maximize |Bu|_2 / gauge(Bu)


def _log_ratio(E, B, U):
    """log(|Bu| / gauge(Bu)) for every row of U; B has orthonormal columns."""
    Y = U @ B.T
    with np.errstate(divide="ignore"):
        return np.log(np.linalg.norm(U, axis=1)) - np.log(gauge_rows(Y, E))


def _smooth_log_gauge(E, B, U, eps, P=None):
    """Smoothed log gauge(Bu) - log|u| and its gradient in u (rows of U)."""
    Z = (U @ B.T) / E.sigma
    un2 = np.sum(U * U, axis=1)
    if math.isinf(E.p):
        A = np.abs(Z)
        top = A.max(axis=1, keepdims=True)
        R = A / top
        S = np.sum(R**P, axis=1, keepdims=True)
        f = np.log(top[:, 0]) + np.log(S[:, 0]) / P
        gz = (R ** (P - 1) * np.sign(Z)) / (top * S)
    else:
        p = E.p
        e2 = eps[:, None] ** 2
        W = (Z * Z + e2) ** (p / 2 - 1)
        T = W * (Z * Z + e2)
        S = np.sum(T, axis=1, keepdims=True)
        f = np.log(S[:, 0]) / p
        gz = W * Z / S
    g = (gz / E.sigma) @ B - U / un2[:, None]
    return f - 0.5 * np.log(un2), g


def _descend(E, B, U, eps, P, iters, tol):
    """Backtracking gradient descent of the smoothed objective, row-wise."""
    R = U.shape[0]
    step = np.ones(R)
    f, g = _smooth_log_gauge(E, B, U, eps, P)
    active = np.ones(R, dtype=bool)
    for _ in range(iters):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        Ua, fa, ga, sa = U[idx], f[idx], g[idx], step[idx]
        gn2 = np.sum(ga * ga, axis=1)
        accepted = np.zeros(idx.size, dtype=bool)
        Un, fn, gnew = Ua.copy(), fa.copy(), ga.copy()
        for _ in range(40):
            todo = ~accepted
            if not np.any(todo):
                break
            cand = Ua[todo] - sa[todo, None] * ga[todo]
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            fc, gc = _smooth_log_gauge(E, B, cand, eps[idx][todo], P)
            ok = fc <= fa[todo] - 1e-4 * sa[todo] * gn2[todo]
            t_idx = np.flatnonzero(todo)
            acc = t_idx[ok]
            Un[acc], fn[acc], gnew[acc] = cand[ok], fc[ok], gc[ok]
            accepted[acc] = True
            sa[t_idx[~ok]] *= 0.5
        decrease = fa - fn
        U[idx], f[idx], g[idx] = Un, fn, gnew
        step[idx] = np.where(accepted, 2.0 * sa, sa)
        stalled = ~accepted | (decrease <= tol * np.maximum(np.abs(fa), 1.0))
        active[idx[stalled]] = False
    return U, ~active


def _null_direction(Bj):
    """Unit vector spanning the null space of a (d-1) x d matrix (None if not 1-dim)."""
    _, s, vt = np.linalg.svd(Bj)
    if Bj.shape[0] and s[-1] <= 1e-12 * max(s[0], 1e-300):
        return None
    return vt[-1]


def _vertex_candidates_from(E, B, u):
    """Kink points near u where the exact objective can peak.

    p <= 1: the d-1 coordinates of Bu that are smallest relative to sigma are
    set to zero.  p = inf: the d coordinates largest relative to sigma are
    set to +-sigma_j.
    """
    m, d = B.shape
    z = (B @ u) / E.sigma
    order = np.argsort(np.abs(z))
    out = []
    if E.p <= 1:
        if d == 1:
            return [np.ones(1)]
        pool = order[: min(d + 1, m) if d <= 8 else d - 1]
        for J in itertools.combinations(pool, d - 1):
            v = _null_direction(B[list(J)])
            if v is not None:
                out.append(v)
        return out
    pool = order[-min(d + 2, m):] if d <= 8 else order[-d:]
    for J in itertools.combinations(pool, d):
        J = list(J)
        try:
            out.append(np.linalg.solve(B[J], np.where(z[J] >= 0, 1.0, -1.0) * E.sigma[J]))
        except np.linalg.LinAlgError:
            continue
    return out


def _default_restarts(d):
    return 16 + 4 * d


def _polish(E, B, u, eps):
    """Quasi-Newton refinement of one start on the smoothed objective (1 < p < inf)."""

    def fg(v):
        f, g = _smooth_log_gauge(E, B, v[None, :], np.array([eps]))
        return float(f[0]), g[0]

    res = minimize(fg, u, jac=True, method="L-BFGS-B", options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12})
    v = res.x
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 and np.all(np.isfinite(v)) else u


def radius_maximize(E, S, restarts=None, iters=500, tol=1e-12, seed=0, keys=(), delegate=True, polish=4):
    """Multistart estimate of the circumradius of the section E ∩ S.

    Maximizes |Bu|_2 / gauge(Bu) over coefficient vectors u by gradient
    descent on a smoothed log-gauge, restarting from the coordinate axes of
    the coefficient space, the projection of e_1 and random directions.
    Smoothing is removed in stages (eps 1e-2 -> 1e-8 relative for finite p,
    an l_P surrogate with growing P for p = inf).  For p <= 1 and p = inf the
    final points are snapped to the nearby kink (vertex) of the exact
    objective.  Every reported value is re-evaluated with the exact gauge,
    so it is a lower bound on the radius.  For 1 < p < inf the best
    ``polish`` restarts are refined by L-BFGS.  p = 2 is delegated to
    :func:`radius_p2_exact` unless ``delegate`` is False.
    """
    if E.p == 2 and delegate:
        return radius_p2_exact(E, S)
    B = S.basis
    d = S.dim
    if d == 0:
        return RadiusEstimate(0.0, "multistart", np.zeros(E.m))
    R = _default_restarts(d) if restarts is None else int(restarts)
    starts = [np.eye(d)]
    b1 = B[0]
    if np.linalg.norm(b1) > 1e-12:
        starts.append(b1[None, :])
    n_rand = max(R - d - len(starts) + 1, 0)
    starts.append(stream(seed, *keys, 7919).standard_normal((n_rand, d)))
    U = np.vstack(starts)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    converged = np.ones(U.shape[0], dtype=bool)

    if math.isinf(E.p):
        for P in (8.0, 32.0, 128.0, 512.0):
            U, conv = _descend(E, B, U, np.zeros(U.shape[0]), P, iters, tol)
        converged &= conv
    else:
        for rel in (1e-2, 1e-4, 1e-6, 1e-8):
            Z = np.abs(U @ B.T) / E.sigma
            eps = rel * Z.mean(axis=1)
            U, conv = _descend(E, B, U, eps, None, iters, tol)
        converged &= conv

    vals = _log_ratio(E, B, U)
    if 1 < E.p < math.inf and polish:
        for i in np.argsort(-vals)[:polish]:
            Z = np.abs(B @ U[i]) / E.sigma
            v = _polish(E, B, U[i], 1e-8 * Z.mean())
            lv = _log_ratio(E, B, v[None, :])[0]
            if lv > vals[i]:
                U[i], vals[i] = v, lv
    if E.p <= 1 or math.isinf(E.p):
        for i in range(U.shape[0]):
            for v in _vertex_candidates_from(E, B, U[i]):
                lv = _log_ratio(E, B, v[None, :])[0]
                if lv > vals[i]:
                    U[i], vals[i] = v / np.linalg.norm(v), lv
    best = int(np.argmax(vals))
    x = _boundary(E, B @ U[best])
    if not converged[best]:
        log.debug("radius_maximize: best restart did not meet the tolerance in %d iterations", iters)
    return RadiusEstimate(float(np.linalg.norm(x)), "multistart", x, U.shape[0], bool(converged[best]))


def _sphere_grid(d, density):
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        th = np.pi * np.arange(density) / density
        return np.column_stack([np.cos(th), np.sin(th)])
    # Fibonacci lattice on the upper hemisphere (the objective is even)
    k = np.arange(density) + 0.5
    z = k / density
    phi = np.pi * (1.0 + 5**0.5) * k
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _vertex_directions(E, B):
    """All kink points of the exact objective on the coefficient sphere (small cases)."""
    m, d = B.shape
    out = []
    if E.p <= 1:
        # superadditivity of the gauge on each sign cone puts the maximum
        # on an extreme ray, i.e. where d-1 coordinates of Bu vanish
        for J in itertools.combinations(range(m), d - 1):
            v = _null_direction(B[list(J)])
            if v is not None:
                out.append(v)
    elif math.isinf(E.p):
        for J in itertools.combinations(range(m), d):
            BJ = B[list(J)]
            if abs(np.linalg.det(BJ)) < 1e-12:
                continue
            for signs in itertools.product((-1.0, 1.0), repeat=d):
                out.append(np.linalg.solve(BJ, np.array(signs) * E.sigma[list(J)]))
    return np.array(out).reshape(-1, d)


def radius_oracle_bruteforce(E, S, grid_density=100_000, vertices=True):
    """Exhaustive search over the unit sphere of a subspace of dimension <= 3.

    The grid is ``grid_density`` equally spaced angles (d = 2) or a Fibonacci
    lattice on the hemisphere (d = 3).  Where the objective has kinks
    (p <= 1 and p = inf) a grid misses the peak by O(step) or worse, so
    with ``vertices`` the finitely many kink points are evaluated as well;
    for p <= 1 and p = inf that alone is exact.
    """
    d = S.dim
    if d > 3:
        raise ValueError(f"brute-force oracle supports dim(S) <= 3, got {d}")
    if d == 0:
        return RadiusEstimate(0.0, "bruteforce", np.zeros(E.m))
    B = S.basis
    U = _sphere_grid(d, int(grid_density))
    if vertices and (E.p <= 1 or math.isinf(E.p)) and d > 1:
        V = _vertex_directions(E, B)
        if V.size:
            U = np.vstack([U, V / np.linalg.norm(V, axis=1, keepdims=True)])
    best_val = -np.inf
    best_u = None
    for start in range(0, U.shape[0], 65536):
        chunk = U[start : start + 65536]
        vals = _log_ratio(E, B, chunk)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_u = vals[i], chunk[i]
    x = _boundary(E, B @ best_u)
    return RadiusEstimate(float(np.linalg.norm(x)), "bruteforce", x, int(U.shape[0]))


# ---------------------------------------------------------------------------
# lower-bound witnesses


@dataclass(frozen=True)
class LargeCoordinate:
    """Unit kernel vector maximizing x_1^2."""

    x: np.ndarray = field(repr=False)
    x1sq: float
    degenerate: bool = False

    def __iter__(self):
        yield self.x
        yield self.x1sq


def large_coordinate_witness(N):
    """Normalized projection of e_1 onto ker N and its squared first coordinate.

    Among unit vectors in ker N this maximizes x_1^2, and x_1^2 equals the
    squared norm of the projection.
    """
    S = N if isinstance(N, Subspace) else kernel_basis(N)
    b = S.basis[0]
    nb2 = float(b @ b)
    if nb2 <= 1e-28:
        return LargeCoordinate(np.zeros(S.m), 0.0, True)
    x = S.basis @ b / math.sqrt(nb2)
    return LargeCoordinate(x, nb2)


@dataclass(frozen=True)
class LowerWitness:
    """x / (1 + 1/sigma_1) for the large-coordinate kernel vector x.

    ``norm2`` is sigma_1 / (1 + sigma_1); the point lies in E when
    ``feasible``.  ``radius_floor`` = |x|_2 / gauge(x) is a lower bound for
    the section radius whether or not the point is feasible.
    """

    x: np.ndarray = field(repr=False)
    norm2: float
    feasible: bool
    gauge: float
    radius_floor: float
    x1sq: float

    def __iter__(self):
        yield self.x
        yield self.norm2
        yield self.feasible


def lower_bound_witness(E, N, rtol=1e-9):
    """Candidate point certifying rad(E, ker N) >= sigma_1 / (1 + sigma_1), for 1 < p <= 2."""
    if not 1 < E.p <= 2:
        raise ValueError(f"lower_bound_witness needs 1 < p <= 2, got p={E.p}")
    lc = large_coordinate_witness(N)
    s1 = float(E.sigma[0])
    if lc.degenerate:
        return LowerWitness(np.zeros(E.m), 0.0, False, 0.0, 0.0, 0.0)
    x = lc.x if lc.x[0] >= 0 else -lc.x
    xt = x / (1.0 + 1.0 / s1)
    g = E.gauge(xt)
    gx = E.gauge(x)
    return LowerWitness(xt, float(np.linalg.norm(xt)), bool(g <= 1.0 + rtol), g, 1.0 / gx, lc.x1sq)


def witness_condition(E, n, eps):
    """n <= eps sigma_m^2 m^{2/p*} (sufficient for the lower-bound event)."""
    p = E.p
    inv_ps = 1.0 - (0.0 if math.isinf(p) else 1.0 / p)
    return n <= eps * E.sigma[-1] ** 2 * E.m ** (2.0 * inv_ps)


# ---------------------------------------------------------------------------
# repeated random sections


@dataclass
class SectionTrials:
    radii: np.ndarray
    witness_gauges: np.ndarray
    converged: np.ndarray
    n: int
    seed: int
    method: str
    floor: float | None = None

    @property
    def median(self):
        return float(np.median(self.radii))

    def quantiles(self, qs=(0.1, 0.25, 0.5, 0.75, 0.9)):
        return dict(zip(qs, np.quantile(self.radii, qs).tolist()))

    @property
    def floor_ok(self):
        if self.floor is None:
            return True
        return bool(np.all(self.radii >= self.floor * (1 - 1e-9) - 1e-12))


def section_radius(E, S, method, seed=0, keys=(), restarts=None):
    if method == "exact_p2":
        return radius_p2_exact(E, S)
    if method == "multistart":
        return radius_maximize(E, S, restarts=restarts, seed=seed, keys=keys)
    raise ValueError(f"unknown method {method!r}")


def random_section_radius_trials(E, n, trials, method="exact_p2", seed=0, threads=1, restarts=None):
    """Radii of ``trials`` independent Gaussian sections of codimension n.

    Trial t uses the information matrix keyed by (seed, t); the result does
    not depend on ``threads``.
    """
    from .gelfand import min_radius

    if method not in ("exact_p2", "multistart"):
        raise ValueError(f"unknown method {method!r}")

    def one(t):
        G = sample_gaussian_info(n, E.m, seed, t)
        r = section_radius(E, kernel_basis(G), method, seed=seed, keys=(t,), restarts=restarts)
        return r.value, E.gauge(r.witness), r.converged

    out = pmap(one, range(int(trials)), threads)
    radii = np.array([o[0] for o in out])
    floor = min_radius(E, n).exact
    res = SectionTrials(
        radii,
        np.array([o[1] for o in out]),
        np.array([o[2] for o in out]),
        int(n),
        int(seed),
        method,
        floor,
    )
    if not res.floor_ok:
        log.warning("a section radius fell below the exact minimal radius %g", floor)
    return res
