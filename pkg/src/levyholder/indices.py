"""Regularity indices: Dalang's condition, ind_H, ind_L and the kernel indices.

Every index is a supremum of exponents keeping an improper spectral integral
finite.  Each probe is a convergence verdict from `spectral`; indices are
located by bisection on the exponent.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import __version__
from .errors import ConfigError, IndeterminateError, PreconditionError
from .kernels import Kernel
from .spectral import (LN2, Convergent, Divergent, RadialGrid, convergence_verdict, masked_product)

PROBE_LO, PROBE_HI = 0.01, 0.99
NEAR_BOUNDARY_WIDEN = 0.05


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class Weight:
    kind: str
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in ("one", "abs_psi_pow", "norm_pow"):
            raise ConfigError(f"unknown weight {self.kind!r}")
        hi = 2.0 if self.kind == "norm_pow" else 1.0
        if not 0.0 <= self.exponent <= hi:
            raise ConfigError(f"weight exponent {self.exponent} outside [0, {hi}]")

    def __call__(self, psi, u):
        if self.kind == "one":
            return np.ones(np.shape(psi))
        if self.kind == "abs_psi_pow":
            return np.abs(psi) ** self.exponent
        with np.errstate(over="ignore"):
            return np.exp(self.exponent * u) * np.ones(np.shape(psi))


def one():
    return Weight("one")


def abs_psi_pow(a):
    return Weight("abs_psi_pow", float(a))


def norm_pow(two_b):
    """Weight |xi|^(2b); the argument is the full power 2b."""
    return Weight("norm_pow", float(two_b))


# ---------------------------------------------------------------------------
# cached exponent values on a radial grid


def default_log_schedule(model, kmax=64, u_max=1e6):
    """Cutoffs 2^k, k = 0..kmax; slowly growing exponents get a much longer
    schedule, geometric in log-radius, so that log-type tails are resolved."""
    lc = np.arange(0, kmax + 1) * LN2
    if getattr(model, "growth", "power") == "log":
        extra = lc[-1] * 2.0 ** (np.arange(1, 200) / 4.0)
        lc = np.concatenate([lc, extra[extra <= u_max]])
    return lc


class SpectralPair:
    """psi evaluated once on the radial quadrature nodes of mu."""

    def __init__(self, psi, mu, log_cutoffs=None, n_nodes=32):
        if psi.dim != mu.dim:
            raise ConfigError(f"dimension mismatch: psi in R^{psi.dim}, mu on R^{mu.dim}")
        self.psi, self.mu = psi, mu
        self.log_cutoffs = default_log_schedule(psi) if log_cutoffs is None else np.asarray(log_cutoffs, float)
        self.grid = RadialGrid(self.log_cutoffs, n_nodes=n_nodes, breakpoints=mu.breakpoints)
        self.m = self.grid.measure_factor(mu)
        self.m_c = self.grid.measure_factor(mu, coarse=True)
        self.vals = _cached_shell(psi, self.grid.u, self.m)
        self.vals_c = _cached_shell(psi, self.grid.u_coarse, self.m_c)

    def _values(self, fn):
        g = self.grid
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            f = masked_product(np.mean(fn(self.vals, g.u[:, None]), axis=1), self.m)
            fc = masked_product(np.mean(fn(self.vals_c, g.u_coarse[:, None]), axis=1), self.m_c)
            atom = float(np.real(fn(np.zeros((1, 1), complex), np.full((1, 1), -np.inf))[0, 0]))
        return f, fc, self.mu.atom * atom

    def series(self, fn):
        """Partial integrals of int fn(psi, u) mu(dxi), averaged over directions."""
        f, fc, atom = self._values(fn)
        return self.grid.series(f, fc, atom)

    def verdict(self, fn, **kw):
        f, fc, atom = self._values(fn)
        if np.any(np.isposinf(f)) and not np.any(np.isnan(f)):
            # a nonnegative integrand beyond the float range: the integral is unbounded
            return Divergent(np.inf, np.inf)
        return convergence_verdict(self.grid.series(f, fc, atom), **kw)


def _cached_shell(psi, u, m):
    cache = psi.__dict__.setdefault("_shell_cache", {})
    key = (u.size, float(u[0]), float(u[-1]), float(u.sum()))
    if key not in cache:
        vals = np.zeros((u.size, psi.directions.shape[0]), dtype=complex)
        live = m > 0
        if live.any():
            vals[live] = psi.shell(u[live])
        cache[key] = vals
    return cache[key]


def _pair(psi, mu, pair, log_cutoffs):
    if pair is not None:
        return pair
    return SpectralPair(psi, mu, log_cutoffs)


def weighted_spectral_integral(psi, mu, weight, *, log_cutoffs=None, pair=None):
    """Verdict on int w(xi) mu(dxi) / (1 + Re psi(xi))."""
    p = _pair(psi, mu, pair, log_cutoffs)
    return p.verdict(lambda v, u: weight(v, u) / (1.0 + v.real))


def dalang(psi, mu, *, log_cutoffs=None, pair=None):
    return weighted_spectral_integral(psi, mu, one(), log_cutoffs=log_cutoffs, pair=pair)


# ---------------------------------------------------------------------------
# bisection


@dataclass
class IndexEstimate:
    value: float
    lower: float
    upper: float
    capped: bool = False
    flags: list = field(default_factory=list)
    probes: list = field(default_factory=list)

    @property
    def width(self):
        return self.upper - self.lower

    def to_dict(self):
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "capped": self.capped, "flags": list(self.flags),
                "probes": [list(p) for p in self.probes]}


def bisect_index(converges_at, *, budget=8, lo=PROBE_LO, hi=PROBE_HI, cap=1.0):
    """Largest exponent in (0, cap) for which `converges_at(x)` holds.

    `converges_at` returns a verdict.  Returns 0 if the smallest probe already
    diverges and `cap` if the largest converges.
    """
    probes = []

    def probe(x):
        v = converges_at(x)
        probes.append((float(x), bool(v.converges), float(v.tail_slope), float(v.log_power),
                       bool(v.near_boundary)))
        return v

    v_hi = probe(hi)
    if v_hi.converges:
        est = IndexEstimate(cap, hi, cap, capped=True, probes=probes)
        return _widen(est, [v_hi])
    v_lo = probe(lo)
    if not v_lo.converges:
        est = IndexEstimate(0.0, 0.0, lo, probes=probes)
        return _widen(est, [v_lo])
    a, b, va, vb = lo, hi, v_lo, v_hi
    for _ in range(budget):
        if b - a <= 1e-12:
            break
        mid = 0.5 * (a + b)
        v = probe(mid)
        if v.converges:
            a, va = mid, v
        else:
            b, vb = mid, v
    est = IndexEstimate(0.5 * (a + b), a, b, probes=probes)
    return _widen(est, [va, vb])


def _widen(est, verdicts):
    if any(v.near_boundary for v in verdicts):
        est.flags.append("near_boundary")
        half = 0.5 * NEAR_BOUNDARY_WIDEN
        est.lower = max(0.0, est.lower - half)
        est.upper = min(1.0, est.upper + half)
    if est.capped:
        est.flags.append("capped")
    return est


def _require_dalang(p, label="Dalang's condition"):
    v = p.verdict(lambda v, u: 1.0 / (1.0 + v.real))
    if not v.converges:
        raise PreconditionError(f"{label} fails: int mu(dxi)/(1 + Re psi) diverges",
                                operation="fractal_index")
    return v


def fractal_index(psi, mu, kind, *, budget=8, check_dalang=True, log_cutoffs=None, pair=None):
    """ind_H (kind 'H', weight |psi|^a) or ind_L (kind 'L', weight |xi|^(2b))."""
    if kind not in ("H", "L"):
        raise ConfigError("kind must be 'H' or 'L'")
    p = _pair(psi, mu, pair, log_cutoffs)
    if check_dalang:
        _require_dalang(p)
    make = abs_psi_pow if kind == "H" else (lambda b: norm_pow(2 * b))
    return bisect_index(lambda x: weighted_spectral_integral(psi, mu, make(x), pair=p), budget=budget)


# ---------------------------------------------------------------------------
# kernel indices


def _kernel_gate(kernel, p, T):
    v = p.verdict(lambda v, u: kernel.energy(v, T))
    if not v.converges:
        raise PreconditionError("kernel is not square integrable against mu (Dalang's condition fails)",
                                operation="kernel_index")
    return v


def kernel_space_index(kernel, mu, T, *, budget=8, log_cutoffs=None, pair=None):
    """I_R(T): sup eta in (0,1) with int_0^T ds int |xi|^eta |h(s,xi)|^2 mu(dxi) < inf."""
    p = _pair(kernel.exponent, mu, pair, log_cutoffs)
    _kernel_gate(kernel, p, T)
    return bisect_index(lambda eta: p.verdict(lambda v, u: np.exp(eta * u) * kernel.energy(v, T)),
                        budget=budget)


def _spectral_value(p, fn):
    try:
        v = p.verdict(fn)
    except IndeterminateError:
        # a crossover (e.g. eps*|xi| ~ 1) inside the fit window; fit the far tail only
        v = p.verdict(fn, tail_fraction=0.25)
    if not isinstance(v, Convergent):
        raise PreconditionError("bounded spectral integral unexpectedly diverges", operation="kernel_time_indices")
    return v.value


def kernel_time_indices(kernel, mu, T, *, budget=8, eps_exponents=range(0, 21), fit_from=6,
                        n_sup=16, smoothing=0.125, log_cutoffs=None, pair=None):
    """I_H, bar-I_H(T) and underline-I_H(T) with brackets.

    The two increment indices evaluate the inner double integral on the grid
    eps = 2^-k and extract the exponent through the integrability primitive
    (sum over lags instead of the eps-integral).
    """
    ks = np.asarray(list(eps_exponents), dtype=float)
    eps = 2.0 ** -ks
    if log_cutoffs is None:
        need = _increment_horizon(kernel, float(eps.min()))
        if pair is None or pair.log_cutoffs[-1] < need:
            log_cutoffs = np.arange(0, max(64, math.ceil(need / LN2)) + 1) * LN2
            if kernel.exponent.growth == "log":
                log_cutoffs = default_log_schedule(kernel.exponent)
            pair = None
    p = _pair(kernel.exponent, mu, pair, log_cutoffs)
    _kernel_gate(kernel, p, T)
    i_h = bisect_index(lambda b: p.verdict(lambda v, u: kernel.weighted_energy(v, b)), budget=budget)
    F = np.array([_spectral_value(p, lambda v, u, e=e: kernel.increment_energy(v, e, T, smoothing)) for e in eps])
    sup_pts = np.arange(1, n_sup + 1) / n_sup
    G = np.array([max(_spectral_value(p, lambda v, u, r=r: kernel.increment_energy(v, r, T, smoothing))
                      for r in e * sup_pts) for e in eps])
    # monotone upper envelope: sup over [0, eps] is nondecreasing in eps
    order = np.argsort(eps)
    G[order] = np.maximum.accumulate(G[order])
    sel = ks >= fit_from
    monotone_F = kernel.kind == "heat" and kernel.exponent.symmetric
    bar = _increment_index(index_from_integrability(eps[sel], F[sel], monotone=monotone_F))
    under = _increment_index(index_from_integrability(eps[sel], G[sel], monotone=True))
    return {"I_H": i_h, "I_H_bar": bar, "I_H_under": under,
            "eps": eps.tolist(), "F": F.tolist(), "G": G.tolist()}


def _increment_horizon(kernel, eps_min, margin=20, u_cap=700.0):
    """Log-radius beyond which every increment integrand is in its decaying regime."""
    u = np.arange(0.0, u_cap, LN2)
    v = np.abs(kernel.exponent.shell(u)).min(axis=1)
    scale = eps_min * (np.sqrt(v) if kernel.kind == "wave" else v)
    hit = np.nonzero(scale >= 1.0)[0]
    if hit.size == 0:
        return u_cap
    return min(u_cap, u[hit[0]] + margin * LN2)


def _increment_index(res):
    v = res.value
    half = 2 * res.stderr + 0.01
    capped = bool(v >= 1.0)
    est = IndexEstimate(float(min(1.0, v)), float(max(0.0, min(1.0, v - half))),
                        float(min(1.0, v + half)), capped=capped)
    if capped:
        est.flags.append("capped")
    if res.kind == "lower_bound":
        est.flags.append("lower_bound")
    return est


# ---------------------------------------------------------------------------
# integrability primitive


@dataclass
class IntegrabilityIndex:
    value: float
    stderr: float
    kind: str
    log_power: float = 0.0
    partial_sum_consistent: bool = True


def index_from_integrability(t, f, monotone=True, *, min_lags=12, tail_fraction=2 / 3):
    """Estimate sup{b: sum_k t_k^(-b) f_k < inf} from samples at t_k -> 0.

    log f is regressed on log(1/t) together with log log(1/t), so that
    logarithmic factors do not bias the power; the negative power is the
    estimate (clamped at 0).  For monotone f this equals the local power of
    f at 0; otherwise it is a lower bound.
    """
    t = np.asarray(t, float)
    f = np.asarray(f, float)
    if t.size != f.size:
        raise ConfigError("t and f must have equal length")
    if t.size < min_lags:
        raise ConfigError(f"need at least {min_lags} lags, got {t.size}")
    if np.any(f < 0) or np.any(t <= 0):
        raise ConfigError("samples must satisfy t > 0 and f >= 0")
    kind = "equality" if monotone else "lower_bound"
    if np.all(f == 0):
        return IntegrabilityIndex(np.inf, 0.0, kind)
    order = np.argsort(-t)
    u = -np.log(t[order])
    y = f[order]
    n_use = max(min_lags, int(math.ceil(tail_fraction * u.size)))
    u, y = u[-n_use:], y[-n_use:]
    keep = y > 0
    if keep.sum() < 4:
        return IntegrabilityIndex(np.inf, 0.0, kind)
    u, ly = u[keep], np.log(y[keep])
    cols = [np.ones_like(u), u]
    use_log = u.min() > 0.5 and u.max() / u.min() > 1.3 and u.size >= 6
    if use_log:
        cols.append(np.log(u))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ coef
    dof = max(1, u.size - X.shape[1])
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(X.T @ X)
    b = max(0.0, -float(coef[1]))
    se = float(math.sqrt(max(cov[1, 1], 0.0)))
    g = float(coef[2]) if use_log else 0.0
    consistent = True
    if monotone and np.isfinite(b):
        consistent = _partial_sums_behave(u, ly, b, max(0.05, 2 * abs(g) / u.max()))
    return IntegrabilityIndex(b, se, kind, g, consistent)


def _partial_sums_behave(u, ly, b, delta=0.05):
    """Terms e^{(b-delta) u} f decay and e^{(b+delta) u} f grow on the last third of the tail.

    A (log)^g factor shifts local slopes by about g/u, so `delta` below that is not resolvable.
    """
    sel = slice(2 * u.size // 3, None)
    if u[sel].size < 3:
        sel = slice(None)
    lo = ly[sel] + (b - delta) * u[sel]
    hi = ly[sel] + (b + delta) * u[sel]
    return bool(np.polyfit(u[sel], lo, 1)[0] < 0 and np.polyfit(u[sel], hi, 1)[0] > 0)


# ---------------------------------------------------------------------------
# reports


@dataclass
class IndexReport:
    dalang: dict
    ind_H: IndexEstimate
    ind_L: IndexEstimate
    kernel_indices: dict = None
    horizon: float = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"schema": "levyholder.index_report/1", "version": __version__,
               "dalang": self.dalang, "ind_H": self.ind_H.to_dict(), "ind_L": self.ind_L.to_dict(),
               "horizon": self.horizon, "provenance": self.provenance}
        if self.kernel_indices:
            out["kernel_indices"] = {k: v.to_dict() for k, v in self.kernel_indices.items()}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)

    CSV_FIELDS = ("ind_H", "ind_H_lower", "ind_H_upper", "ind_L", "ind_L_lower", "ind_L_upper",
                  "dalang", "I_R", "I_H", "I_H_bar", "I_H_under")

    def csv_row(self):
        k = self.kernel_indices or {}
        get = lambda name: k[name].value if name in k else float("nan")
        return {"ind_H": self.ind_H.value, "ind_H_lower": self.ind_H.lower, "ind_H_upper": self.ind_H.upper,
                "ind_L": self.ind_L.value, "ind_L_lower": self.ind_L.lower, "ind_L_upper": self.ind_L.upper,
                "dalang": self.dalang.get("verdict"), "I_R": get("I_R"), "I_H": get("I_H"),
                "I_H_bar": get("I_H_bar"), "I_H_under": get("I_H_under")}


def compute_index_report(psi, mu, *, kernel_kind=None, T=1.0, budget=8, log_cutoffs=None):
    p = SpectralPair(psi, mu, log_cutoffs)
    dv = _require_dalang(p)
    h = fractal_index(psi, mu, "H", budget=budget, check_dalang=False, pair=p)
    l = fractal_index(psi, mu, "L", budget=budget, check_dalang=False, pair=p)
    kern = None
    if kernel_kind is not None:
        k = Kernel(kernel_kind, psi)
        times = kernel_time_indices(k, mu, T, budget=budget, pair=p)
        kern = {"I_R": kernel_space_index(k, mu, T, budget=budget, pair=p),
                "I_H": times["I_H"], "I_H_bar": times["I_H_bar"], "I_H_under": times["I_H_under"]}
    prov = {"exponent": psi.to_config() if psi.family != "numeric_triplet" or psi.triplet.jump_density is None else psi.family,
            "measure": mu.to_config() if mu.family != "custom" else "custom",
            "log_cutoffs": p.log_cutoffs.tolist(), "bisection_budget": budget,
            "probe_range": [PROBE_LO, PROBE_HI], "quadrature_nodes": p.grid.n_nodes}
    return IndexReport({"verdict": "convergent", "value": dv.value, "err": dv.err}, h, l, kern,
                       T if kernel_kind else None, prov)
