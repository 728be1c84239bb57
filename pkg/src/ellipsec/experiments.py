"""Experiment harness: configs, per-trial tables and plot data.

Every ``run_*`` function is deterministic in its config (seed included) and
returns :class:`Table` objects; the worker count only changes wall time.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from ._rng import pmap, stream
from .ellipsoid import Ellipsoid, Semiaxes, dual_exponent, inv, quasi_norm
from .gaussian import escape_bound
from .gelfand import (
    REGIONS,
    GelfandQuery,
    decay_exponents,
    gelfand_exact_tail,
    gelfand_upper_quasi,
    gelfand_upper_thmA,
    min_radius,
)
from .recovery import decode_lp, gaussian_rip_condition, recovery_radius_upper
from .sections import (
    kernel_basis,
    large_coordinate_witness,
    lower_bound_witness,
    witness_condition,
    radius_maximize,
    radius_p2_exact,
    sample_gaussian_info,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("dichotomy", "decay", "bound_audit", "lower_probe", "recovery_sweep", "radius", "gelfand")
METHODS = ("auto", "exact_p2", "multistart", "witness", "decoder")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


# ---------------------------------------------------------------------------
# configuration


def _float(v):
    v = v.strip().lower()
    if v in ("inf", "infinity", "+inf"):
        return math.inf
    if "/" in v:
        a, b = v.split("/", 1)
        return float(a) / float(b)
    return float(v)


def _int_list(v):
    return tuple(int(x) for x in v.replace(";", ",").split(",") if x.strip())


def _opt(conv):
    def f(v):
        return None if v.strip().lower() in ("", "none") else conv(v)

    return f


def _bool(v):
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_CONVERT = {
    "experiment": str,
    "p": _float,
    "lam": _opt(_float),
    "sigma_file": _opt(str),
    "n_grid": _int_list,
    "m": _opt(int),
    "m_rule": str,
    "m_factor": _float,
    "m_grid": _int_list,
    "trials": int,
    "seed": int,
    "method": str,
    "q": _float,
    "eps": _float,
    "sparsity": _int_list,
    "restarts": _opt(int),
    "probe_count": int,
    "C": _float,
    "D": _float,
    "C1": _float,
    "k_fraction": _float,
    "sharp": _bool,
    "output": _opt(str),
}

_ALIASES = {"lambda": "lam", "n": "n_grid", "sigma": "sigma_file", "k": "k_fraction", "c": "C", "d": "D", "c1": "C1"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration, read from ``key = value`` lines.

    ``m_rule`` is ``fixed`` (m given, default 8 * max n) or ``factor``
    (m = ceil(m_factor * n) per n).  ``m_grid`` is used by the dichotomy and
    lower-bound probes, which hold n fixed and let m grow.
    """

    experiment: str = "decay"
    p: float = 2.0
    lam: float | None = 1.0
    sigma_file: str | None = None
    n_grid: tuple = (8, 16, 32, 64)
    m: int | None = None
    m_rule: str = "fixed"
    m_factor: float = 8.0
    m_grid: tuple = ()
    trials: int = 50
    seed: int = 0
    method: str = "auto"
    q: float = 2.0
    eps: float = 0.25
    sparsity: tuple = ()
    restarts: int | None = None
    probe_count: int = 16
    C: float = 1.0
    D: float = 1.0
    C1: float = 1.0
    k_fraction: float = 0.25
    sharp: bool = False
    output: str | None = None

    @classmethod
    def from_mapping(cls, mapping):
        kw = {}
        for key, raw in mapping.items():
            k = key.strip().replace("-", "_")
            k = _ALIASES.get(k, _ALIASES.get(k.lower(), k))
            if k not in _CONVERT:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                kw[k] = _CONVERT[k](str(raw))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text, overrides=None):
        return cls.from_mapping({**parse_key_values(text.splitlines()), **(overrides or {})})

    @classmethod
    def from_file(cls, path, overrides=None):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, overrides)

    def with_(self, **kw):
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.p > 0:
            raise ConfigError(f"p must be positive, got {self.p}")
        if self.sigma_file is None and (self.lam is None or not self.lam >= 0):
            raise ConfigError("need lambda >= 0 or a sigma file")
        if not self.n_grid:
            raise ConfigError("n_grid is empty")
        if any(n < 1 for n in self.n_grid) or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError(f"n_grid must be positive and strictly increasing, got {self.n_grid}")
        if any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])):
            raise ConfigError(f"m_grid must be strictly increasing, got {self.m_grid}")
        if self.m_rule not in ("fixed", "factor"):
            raise ConfigError(f"m_rule must be 'fixed' or 'factor', got {self.m_rule!r}")
        if self.m_rule == "factor" and not self.m_factor > 1:
            raise ConfigError("m_factor must exceed 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0 < self.eps < 1:
            raise ConfigError("eps must lie in (0, 1)")
        if not 0 < self.k_fraction <= 1:
            raise ConfigError("k_fraction must lie in (0, 1]")
        if not self.q > 0:
            raise ConfigError("q must be positive")
        for n, m in self.pairs():
            if n >= m:
                raise ConfigError(f"need n < m, got n={n}, m={m}")
        if self.sigma_file is not None:
            size = len(self.semiaxes())
            big = max(m for _, m in self.pairs())
            if big > size:
                raise ConfigError(f"sigma file has {size} entries but m={big} is requested")

    def m_for(self, n):
        if self.m_rule == "factor":
            return int(math.ceil(self.m_factor * n))
        return self.m if self.m is not None else 8 * max(self.n_grid)

    def pairs(self):
        """(n, m) pairs of the experiment, n outer, m inner."""
        if self.m_grid and self.experiment in ("dichotomy", "lower_probe"):
            return [(n, m) for n in self.n_grid for m in self.m_grid]
        return [(n, self.m_for(n)) for n in self.n_grid]

    def semiaxes(self):
        try:
            return Semiaxes.from_csv(self.sigma_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read semiaxes from {self.sigma_file}: {exc}") from None

    def ellipsoid(self, m):
        if self.sigma_file is not None:
            return Ellipsoid(self.p, self.semiaxes().sigma[:m])
        if self.lam == 0:
            return Ellipsoid.ball(self.p, m)
        return Ellipsoid.polynomial(self.p, m, self.lam)

    @property
    def lambda_label(self):
        return "custom" if self.sigma_file is not None else self.lam

    def radius_method(self):
        if self.method != "auto":
            return self.method
        return "exact_p2" if self.p == 2 else "multistart"


def parse_key_values(lines):
    """``key = value`` pairs; blank lines and ``#`` comments are skipped."""
    out = {}
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# tables


def format_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class Table:
    name: str
    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, **row):
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.rows.append(row)

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_cell(r[c]) for c in self.columns])
        return buf.getvalue()

    def to_tsv(self):
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(format_cell(r[c]) for c in self.columns) for r in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, out_dir, suffix=".csv"):
        path = Path(out_dir) / f"{self.name}{suffix}"
        path.parent.mkdir(parents=True, exist_ok=True)
        text = self.to_csv() if suffix == ".csv" else self.to_tsv()
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return path


def wilson(hits, trials, level=0.95):
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(int(hits), int(trials)).proportion_ci(level, method="wilson")
    return float(ci.low), float(ci.high)


def _fit_loglog(x, y):
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), resid


# ---------------------------------------------------------------------------
# radius trials


def _section_value(E, G, method, seed, keys, restarts):
    """(radius, witness_gauge, converged) of ker G for one trial."""
    if method == "witness":
        w = lower_bound_witness(E, G)
        return w.radius_floor, 1.0, True
    S = kernel_basis(G)
    if method == "exact_p2":
        if E.p != 2:
            raise ConfigError("method exact_p2 needs p = 2")
        r = radius_p2_exact(E, S)
    else:
        r = radius_maximize(E, S, restarts=restarts, seed=seed, keys=keys)
    return r.value, E.gauge(r.witness), r.converged


RADIUS_COLUMNS = ("trial", "seed", "n", "m", "p", "lambda_or_custom", "method", "radius", "witness_gauge", "converged")


def run_radius(cfg, threads=1):
    """Per-trial radii of Gaussian sections for every (n, m) pair."""
    method = cfg.radius_method()
    if method not in ("exact_p2", "multistart", "witness"):
        raise ConfigError(f"method {method!r} does not compute section radii")
    table = Table("radius", RADIUS_COLUMNS)
    for n, m in cfg.pairs():
        E = cfg.ellipsoid(m)

        def one(t, n=n, E=E):
            G = sample_gaussian_info(n, E.m, cfg.seed, t)
            return _section_value(E, G, method, cfg.seed, (t,), cfg.restarts)

        for t, (r, g, conv) in enumerate(pmap(one, range(cfg.trials), threads)):
            table.add(
                trial=t,
                seed=cfg.seed,
                n=n,
                m=m,
                p=cfg.p,
                lambda_or_custom=cfg.lambda_label,
                method=method,
                radius=r,
                witness_gauge=g,
                converged=conv,
            )
    return table


# ---------------------------------------------------------------------------
# decay


@dataclass
class DecayResult:
    trials: Table
    fit: Table
    slope: float
    constant: float
    predicted_slope: float | None


def run_decay(cfg, threads=1):
    """Median radius per n and the least-squares slope of log median vs log n.

    ``constant`` is exp(intercept), so the fit reads constant * n^slope.
    """
    if len(cfg.n_grid) < 2:
        raise ConfigError("a decay fit needs at least two values of n")
    p = cfg.p
    if cfg.sigma_file is None and not (p >= 1 and cfg.lam > 1.0 - inv(p)):
        log.warning("decay: (p=%g, lambda=%g) is outside the regime lambda > 1/p*, p >= 1", p, cfg.lam)
    radii = run_radius(cfg.with_(experiment="radius"), threads)
    table = Table("decay", RADIUS_COLUMNS + ("floor", "thmA_bound"))
    fit = Table("decay_fit", ("n", "m", "trials", "median", "fitted", "log_residual", "floor", "thmA_bound", "ratio_to_thmA", "slope", "constant"))
    medians = []
    for n, m in cfg.pairs():
        E = cfg.ellipsoid(m)
        mr = min_radius(E, n, lam=cfg.lam, C=cfg.C, D=cfg.D, k_fraction=cfg.k_fraction)
        thm = gelfand_upper_thmA(E.sigma, p, n, m, C=cfg.C, k_fraction=cfg.k_fraction)[0] if p >= 1 else None
        rows = [r for r in radii.rows if r["n"] == n]
        for r in rows:
            table.add(**r, floor=mr.exact, thmA_bound=thm)
        medians.append((n, m, len(rows), statistics.median(r["radius"] for r in rows), mr.exact, thm))
    slope, intercept, resid = _fit_loglog([x[0] for x in medians], [x[3] for x in medians])
    constant = math.exp(intercept)
    for (n, m, k, med, floor, thm), res in zip(medians, resid):
        fit.add(
            n=n,
            m=m,
            trials=k,
            median=med,
            fitted=constant * n**slope,
            log_residual=float(res),
            floor=floor,
            thmA_bound=thm,
            ratio_to_thmA=None if thm is None else med / thm,
            slope=slope,
            constant=constant,
        )
    predicted = None
    if cfg.sigma_file is None and p >= 1:
        predicted = decay_exponents(p, cfg.lam).random_decay
    return DecayResult(table, fit, slope, constant, predicted)


# ---------------------------------------------------------------------------
# dichotomy and lower-bound probes


def run_dichotomy(cfg, threads=1):
    """Empirical P[radius >= sigma_1/(1+sigma_1)] for fixed n and growing m.

    The radius is exact for p = 2.  Otherwise the default is the certified
    lower estimate from the large-coordinate witness (method ``witness``);
    ``multistart`` uses the optimizer.
    """
    p = cfg.p
    if cfg.sigma_file is None and not (1 < p <= 2 and 0 < cfg.lam < 1.0 - inv(p)):
        log.warning("dichotomy: (p=%g, lambda=%g) is outside 1 < p <= 2, 0 < lambda < 1/p*", p, cfg.lam)
    method = cfg.method if cfg.method != "auto" else ("exact_p2" if p == 2 else "witness")
    if method == "witness" and not 1 < p <= 2:
        raise ConfigError("the witness method needs 1 < p <= 2")
    ms = cfg.m_grid or (cfg.m_for(cfg.n_grid[0]),)
    trials = Table("dichotomy_trials", RADIUS_COLUMNS + ("threshold", "event"))
    summary = Table(
        "dichotomy",
        ("n", "m", "trials", "hits", "frequency", "wilson_low", "wilson_high", "threshold", "condition_holds", "first_condition_m", "eps"),
    )
    for n in cfg.n_grid:
        first = next((m for m in ms if m > n and witness_condition(cfg.ellipsoid(m), n, cfg.eps)), None)
        for m in ms:
            if m <= n:
                continue
            E = cfg.ellipsoid(m)
            s1 = float(E.sigma[0])
            thr = s1 / (1.0 + s1)

            def one(t, n=n, E=E):
                G = sample_gaussian_info(n, E.m, cfg.seed, t)
                return _section_value(E, G, method, cfg.seed, (t,), cfg.restarts)

            hits = 0
            for t, (r, g, conv) in enumerate(pmap(one, range(cfg.trials), threads)):
                ev = r >= thr * (1 - 1e-12)
                hits += ev
                trials.add(
                    trial=t, seed=cfg.seed, n=n, m=m, p=p, lambda_or_custom=cfg.lambda_label, method=method,
                    radius=r, witness_gauge=g, converged=conv, threshold=thr, event=ev,
                )
            lo, hi = wilson(hits, cfg.trials)
            summary.add(
                n=n, m=m, trials=cfg.trials, hits=hits, frequency=hits / cfg.trials, wilson_low=lo, wilson_high=hi,
                threshold=thr, condition_holds=witness_condition(E, n, cfg.eps), first_condition_m=first, eps=cfg.eps,
            )
    return summary, trials


def run_lower_probe(cfg, threads=1):
    """Large-coordinate statistics and lower-bound witnesses per (m, trial)."""
    p = cfg.p
    if not 1 < p <= 2:
        raise ConfigError(f"lower_probe needs 1 < p <= 2, got p={p}")
    ms = cfg.m_grid or (cfg.m_for(cfg.n_grid[0]),)
    trials = Table(
        "probe_trials",
        ("trial", "seed", "n", "m", "p", "lambda_or_custom", "x1sq", "x1sq_target", "event", "witness_feasible", "witness_norm", "radius_floor"),
    )
    summary = Table(
        "probe",
        ("n", "m", "eps", "trials", "x1sq_target", "event_frequency", "event_low", "event_high", "expected_at_least",
         "feasible_frequency", "feasible_low", "feasible_high", "median_radius_floor", "condition_holds"),
    )
    for n in cfg.n_grid:
        for m in ms:
            if m <= n:
                continue
            E = cfg.ellipsoid(m)
            target = 1.0 - n / (cfg.eps * m)

            def one(t, n=n, E=E):
                G = sample_gaussian_info(n, E.m, cfg.seed, t)
                lc = large_coordinate_witness(G.entries)
                w = lower_bound_witness(E, kernel_basis(G))
                return lc.x1sq, w

            ev_hits = feas_hits = 0
            floors = []
            for t, (x1sq, w) in enumerate(pmap(one, range(cfg.trials), threads)):
                ev = x1sq >= target
                ev_hits += ev
                feas_hits += w.feasible
                floors.append(w.radius_floor)
                trials.add(
                    trial=t, seed=cfg.seed, n=n, m=m, p=p, lambda_or_custom=cfg.lambda_label, x1sq=x1sq,
                    x1sq_target=target, event=ev, witness_feasible=w.feasible, witness_norm=w.norm2,
                    radius_floor=w.radius_floor,
                )
            elo, ehi = wilson(ev_hits, cfg.trials)
            flo, fhi = wilson(feas_hits, cfg.trials)
            summary.add(
                n=n, m=m, eps=cfg.eps, trials=cfg.trials, x1sq_target=target, event_frequency=ev_hits / cfg.trials,
                event_low=elo, event_high=ehi, expected_at_least=1.0 - cfg.eps,
                feasible_frequency=feas_hits / cfg.trials, feasible_low=flo, feasible_high=fhi,
                median_radius_floor=statistics.median(floors), condition_holds=witness_condition(E, n, cfg.eps),
            )
    return summary, trials


# ---------------------------------------------------------------------------
# bound audit


def _audit_shape(cfg, E, n):
    """(shape value, name) the observed radius is fitted against."""
    m = E.m
    if cfg.p >= 1:
        return gelfand_upper_thmA(E.sigma, cfg.p, n, m, C=1.0, k_fraction=cfg.k_fraction)[0], "theorem_A"
    if cfg.sigma_file is not None:
        raise ConfigError("the p < 1 audit needs polynomial semiaxes (lambda)")
    L = math.log(math.e * m / n)
    expo = cfg.lam + 1.0 / cfg.p - 1.0 / cfg.q
    return (L / n) ** expo, "theorem_C"


def run_bound_audit(cfg, threads=1):
    """Observed radii against every applicable bound, and the fitted constant per n.

    Observed values are exact for p = 2, multistart estimates for other
    p >= 1 and the decoder proxy for p < 1.  Per n, C_hat is the maximum
    over trials of observed / shape; the audit is stable when
    max C_hat / min C_hat <= 2 across the grid.
    """
    p = cfg.p
    if p < 1 and not (p < cfg.q <= 2):
        raise ConfigError(f"the p < 1 audit needs p < q <= 2, got q={cfg.q}")
    method = "decoder" if p < 1 else cfg.radius_method()
    trials = Table(
        "audit_trials",
        ("trial", "seed", "n", "m", "p", "q", "lambda_or_custom", "method", "observed", "shape", "shape_name", "ratio",
         "k_used", "thmA", "quasi", "quasi_condition", "escape", "escape_prob", "escape_transfers", "floor"),
    )
    summary = Table("audit", ("n", "m", "trials", "C_hat", "median_ratio", "shape", "shape_name", "spread", "stable"))
    per_n = []
    for n, m in cfg.pairs():
        E = cfg.ellipsoid(m)
        shape, shape_name = _audit_shape(cfg, E, n)
        thm = k = esc = None
        if p >= 1:
            thm, k = gelfand_upper_thmA(E.sigma, p, n, m, C=cfg.C, k_fraction=cfg.k_fraction)
            ps = dual_exponent(p)
            rho = quasi_norm(E.sigma[k:], ps) / math.sqrt(k)
            esc = escape_bound(E, rho, k, n, sharp=cfg.sharp)
        quasi = gelfand_upper_quasi(cfg.lam, p, cfg.q, n, m, C=cfg.C, D=cfg.D) if (p <= 1 and cfg.sigma_file is None) else None
        floor = min_radius(E, n).exact if cfg.q == 2 else None

        def one(t, n=n, E=E):
            G = sample_gaussian_info(n, E.m, cfg.seed, t)
            if method == "decoder":
                r = recovery_radius_upper(E, G.entries, q=cfg.q, probe_count=cfg.probe_count, seed=cfg.seed, keys=(n, t))
                return r.value
            return _section_value(E, G, method, cfg.seed, (t,), cfg.restarts)[0]

        ratios = []
        for t, obs in enumerate(pmap(one, range(cfg.trials), threads)):
            ratios.append(obs / shape)
            trials.add(
                trial=t, seed=cfg.seed, n=n, m=m, p=p, q=cfg.q, lambda_or_custom=cfg.lambda_label, method=method,
                observed=obs, shape=shape, shape_name=shape_name, ratio=obs / shape, k_used=k, thmA=thm,
                quasi=None if quasi is None else quasi.value, quasi_condition=None if quasi is None else quasi.condition_ok,
                escape=None if esc is None else esc.radius_bound, escape_prob=None if esc is None else esc.success_prob,
                escape_transfers=None if esc is None else esc.transfers, floor=floor,
            )
        per_n.append((n, m, max(ratios), statistics.median(ratios), shape, shape_name))
    chats = [x[2] for x in per_n]
    spread = max(chats) / min(chats)
    for n, m, chat, med, shape, name in per_n:
        summary.add(n=n, m=m, trials=cfg.trials, C_hat=chat, median_ratio=med, shape=shape, shape_name=name, spread=spread, stable=spread <= 2.0)
    return summary, trials


# ---------------------------------------------------------------------------
# recovery


RECOVERY_COLUMNS = ("seed", "n", "m", "s_or_lambda", "p", "q", "trial", "success", "error_q", "iterations", "rip_condition")


def run_recovery_sweep(cfg, threads=1):
    """Sparse recovery by Delta_p, or the decoder-proxy radius when no sparsity is given.

    With ``sparsity`` set, each trial draws a random s-sparse x0 with
    Gaussian entries and decodes N x0; success means max |z - x0| <= 1e-6
    max(1, max |x0|).  Without it, each trial reports the decoder-proxy
    radius of the ellipsoid (success is then empty).
    """
    p = cfg.p
    if not 0 < p <= 1:
        raise ConfigError(f"recovery_sweep needs 0 < p <= 1, got p={p}")
    table = Table("recover", RECOVERY_COLUMNS)
    for n, m in cfg.pairs():
        if cfg.sparsity:
            for s in cfg.sparsity:
                if not 1 <= s <= m:
                    raise ConfigError(f"sparsity {s} outside [1, {m}]")

                def one(t, n=n, m=m, s=s):
                    G = sample_gaussian_info(n, m, cfg.seed, t).entries / math.sqrt(n)
                    rng = stream(cfg.seed, n, m, s, t, 31337)
                    x0 = np.zeros(m)
                    x0[rng.choice(m, size=s, replace=False)] = rng.standard_normal(s)
                    res = decode_lp(G, G @ x0, p)
                    err = res.z - x0
                    ok = float(np.max(np.abs(err))) <= 1e-6 * max(1.0, float(np.max(np.abs(x0))))
                    return ok, quasi_norm(err, cfg.q), res.iterations

                for t, (ok, e, it) in enumerate(pmap(one, range(cfg.trials), threads)):
                    table.add(seed=cfg.seed, n=n, m=m, s_or_lambda=s, p=p, q=cfg.q, trial=t, success=ok, error_q=e,
                              iterations=it, rip_condition=gaussian_rip_condition(n, m, s, cfg.C1))
        else:
            if not p < cfg.q <= 2:
                raise ConfigError(f"the decoder proxy needs p < q <= 2, got q={cfg.q}")
            E = cfg.ellipsoid(m)

            def one(t, n=n, E=E):
                G = sample_gaussian_info(n, E.m, cfg.seed, t)
                return recovery_radius_upper(E, G.entries, q=cfg.q, probe_count=cfg.probe_count, seed=cfg.seed, keys=(n, t))

            for t, r in enumerate(pmap(one, range(cfg.trials), threads)):
                table.add(seed=cfg.seed, n=n, m=m, s_or_lambda=cfg.lambda_label, p=p, q=cfg.q, trial=t, success=None,
                          error_q=r.max_error, iterations=r.probes, rip_condition=None)
    return table


# ---------------------------------------------------------------------------
# bound tables


def run_gelfand(cfg):
    """Bound table: exact tails, minimal-radius brackets, theorem shapes and decay rates."""
    table = Table(
        "gelfand",
        ("theorem", "p", "q_or_2", "lambda", "n", "m", "k_used", "value", "C", "D", "k_fraction", "note"),
    )
    p, q = cfg.p, cfg.q

    def add(thm, n, m, k, v, note=""):
        row = {"theorem": thm, "p": p, "q_or_2": q, "lambda": cfg.lambda_label, "n": n, "m": m, "k_used": k}
        table.add(**row, value=v, C=cfg.C, D=cfg.D, k_fraction=cfg.k_fraction, note=note)

    for n, m in cfg.pairs():
        E = cfg.ellipsoid(m)
        if q <= p:
            add("exact_tail", n, m, None, gelfand_exact_tail(GelfandQuery(E.sigma, p, q, n)), "c_n")
        if q == 2:
            mr = min_radius(E, n, lam=cfg.lam if cfg.sigma_file is None else None, C=cfg.C, D=cfg.D, k_fraction=cfg.k_fraction)
            if mr.exact is not None:
                add("min_radius", n, m, None, mr.exact, "exact")
            else:
                add("min_radius_lower", n, m, None, mr.lower, "certified")
                add("min_radius_upper", n, m, None, mr.certified_upper, "certified")
        if p >= 1:
            v, k = gelfand_upper_thmA(E.sigma, p, n, m, C=cfg.C, k_fraction=cfg.k_fraction)
            add("theorem_A", n, m, k, v, "shape")
        elif cfg.sigma_file is None and p < q <= 2:
            qb = gelfand_upper_quasi(cfg.lam, p, q, n, m, C=cfg.C, D=cfg.D)
            add("theorem_C", n, m, None, qb.value, "shape" if qb.condition_ok else "condition_fails")
    if cfg.sigma_file is None and cfg.lam > 0:
        d = decay_exponents(p, cfg.lam)
        add("decay_minimal", None, None, None, d.minimal_decay, d.region)
        add("decay_random", None, None, None, d.random_decay, d.region)
    return table


# ---------------------------------------------------------------------------
# plot data

PLOT_KINDS = ("loglog_decay", "phase_diagram", "probability_curve")


def _read_csv(path):
    if path is None:
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plotdata(csv_in, kind, grid=50):
    """Tab-separated plot table of the given kind.

    ``loglog_decay`` takes a decay or radius CSV and gives one row per n;
    ``probability_curve`` takes a dichotomy or probe summary;
    ``phase_diagram`` needs no input and evaluates the region function on a
    grid x grid lattice of cell midpoints in (1/p, lambda) in (0, 10/7]^2.
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    if kind == "phase_diagram":
        t = Table("phase_diagram", ("inv_p", "lambda", "region_code", "region", "random_decay"))
        top = 10.0 / 7.0
        for i in range(grid):
            x = (i + 0.5) * top / grid
            for j in range(grid):
                lam = (j + 0.5) * top / grid
                d = decay_exponents(1.0 / x, lam)
                t.add(inv_p=x, **{"lambda": lam}, region_code=d.region_code, region=d.region, random_decay=d.random_decay)
        return t
    rows = _read_csv(csv_in)
    if kind == "loglog_decay":
        t = Table("loglog_decay", ("n", "median", "log_n", "log_median"))
        by_n = {}
        for r in rows:
            val = r.get("median") or r.get("radius") or r.get("observed")
            by_n.setdefault(int(r["n"]), []).append(float(val))
        for n in sorted(by_n):
            med = statistics.median(by_n[n])
            t.add(n=n, median=med, log_n=math.log(n), log_median=math.log(med) if med > 0 else None)
        return t
    t = Table("probability_curve", ("n", "m", "frequency", "low", "high"))
    for r in rows:
        if "frequency" in r:
            f, lo, hi = r["frequency"], r["wilson_low"], r["wilson_high"]
        else:
            f, lo, hi = r["event_frequency"], r["event_low"], r["event_high"]
        t.add(n=int(r["n"]), m=int(r["m"]), frequency=float(f), low=float(lo), high=float(hi))
    return t


__all__ = [
    "REGIONS",
    "ConfigError",
    "DecayResult",
    "ExperimentConfig",
    "Table",
    "emit_plotdata",
    "parse_key_values",
    "run_bound_audit",
    "run_decay",
    "run_dichotomy",
    "run_gelfand",
    "run_lower_probe",
    "run_radius",
    "run_recovery_sweep",
    "wilson",
]
