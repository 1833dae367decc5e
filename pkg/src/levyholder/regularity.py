"""Variograms, L2-increment Hoelder exponents and classification against the indices.

A variogram is g(eps) = sup over base points of E|u(p + eps e) - u(p)|^2 along
time or space.  For a Gaussian field g(eps) ~ eps^(2 gamma) gives local
Hoelder continuity of every order below gamma, so the fitted quantity is
slope / 2.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy import stats

from .errors import ConfigError, DegenerateTableError
from .fieldsim import FieldSample, covariance_oracle
from .indices import index_from_integrability

N_FIT = 6
N_SMALL = 4


@dataclass
class ExactSource:
    kernel: object
    mu: object


def exact(kernel, mu):
    return ExactSource(kernel, mu)


@dataclass
class VariogramTable:
    direction: str
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    mode: str
    base_points: list = field(default_factory=list)
    policy: str = "sup"
    rejected: list = field(default_factory=list)

    def __post_init__(self):
        self.lags = np.asarray(self.lags, float)
        self.values = np.asarray(self.values, float)
        self.stderr = np.asarray(self.stderr, float)

    def to_csv(self, path=None):
        from .config import format_number
        lines = ["direction,lag,value,stderr,mode"]
        for lag, v, s in zip(self.lags, self.values, self.stderr):
            lines.append(",".join([self.direction, format_number(lag), format_number(v), format_number(s),
                                   self.mode]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def dyadic_lags(k_min=3, k_max=14, scale=1.0):
    return scale * 2.0 ** -np.arange(k_min, k_max + 1, dtype=float)


def variogram(source, direction, lags, base_grid=None, *, x0=0.0, n_groups=20):
    """Exact (oracle) or empirical (FieldSample) variogram along `direction`.

    `base_grid` lists base times (both directions; the field is stationary in
    space).  Empirical mode averages over replicas and all admissible base
    points of the sample grid and takes the sup over base times; standard
    errors are delete-a-group jackknife over replicas.
    """
    if direction not in ("time", "space"):
        raise ConfigError("direction must be 'time' or 'space'")
    lags = np.sort(np.asarray(lags, float))[::-1]
    if lags.size < 8:
        raise ConfigError("a variogram needs at least 8 lags")
    if np.any(lags <= 0):
        raise ConfigError("lags must be positive")
    if isinstance(source, FieldSample):
        return _empirical(source, direction, lags, base_grid, n_groups)
    if not isinstance(source, ExactSource):
        raise ConfigError("source must be exact(kernel, mu) or a FieldSample")
    return _exact(source, direction, lags, base_grid, x0)


def _exact(src, direction, lags, base_grid, x0):
    base = [1.0] if base_grid is None else [float(t) for t in np.atleast_1d(base_grid)]
    if any(t <= 0 for t in base):
        raise ConfigError("base times must be positive")
    d = src.mu.dim
    x = np.zeros(d)
    x[0] = x0
    cache = {}

    def cov(p, q):
        key = (p[0], q[0], float(q[1][0] - p[1][0]))
        if key not in cache:
            cache[key] = covariance_oracle(src.kernel, src.mu, p, q)
        return cache[key]

    vals = np.empty(lags.size)
    for i, lag in enumerate(lags):
        best = -np.inf
        for t in base:
            p = (t, x)
            if direction == "time":
                q = (t + lag, x)
            else:
                e = x.copy()
                e[0] += lag
                q = (t, e)
            g = cov(q, q) + cov(p, p) - 2 * cov(p, q)
            best = max(best, g)
        vals[i] = max(best, 0.0)
    return VariogramTable(direction, lags, vals, np.zeros_like(vals), "exact", base)


def _empirical(sample, direction, lags, base_grid, n_groups):
    vals = sample.values
    R, T, X = vals.shape
    tg = sample.time_grid
    sg = np.asarray(sample.space_grid)
    sg1 = sg if sg.ndim == 1 else sg[:, 0]
    if direction == "time":
        step, axis_len = np.diff(tg), T
    else:
        step, axis_len = np.diff(sg1), X
    if step.size == 0 or not np.allclose(step, step[0], rtol=1e-9, atol=0):
        raise ConfigError(f"empirical {direction} variograms need a uniform {direction} grid")
    dx = step[0]
    if base_grid is None:
        base_idx = np.arange(T)
    else:
        base_idx = np.array([int(np.argmin(np.abs(tg - t))) for t in np.atleast_1d(base_grid)])
    G = int(min(n_groups, R))
    groups = np.array_split(np.arange(R), G)
    kept, v_out, se_out, rejected = [], [], [], []
    for lag in lags:
        k = lag / dx
        kr = int(round(k))
        if kr < 1 or abs(k - kr) > 1e-6 * max(1.0, k) or kr >= axis_len:
            rejected.append(float(lag))
            continue
        if direction == "time":
            ok = base_idx[base_idx + kr < T]
            if ok.size == 0:
                rejected.append(float(lag))
                continue
            inc = vals[:, ok + kr, :] - vals[:, ok, :]          # (R, nb, X)
            per = np.mean(inc**2, axis=2)                       # (R, nb)
        else:
            inc = vals[:, base_idx, kr:] - vals[:, base_idx, :-kr]
            per = np.mean(inc**2, axis=2)
        stat = lambda rows: float(np.max(np.mean(per[rows], axis=0)))
        full = stat(np.arange(R))
        if G > 1:
            loo = np.array([stat(np.setdiff1d(np.arange(R), g)) for g in groups])
            se = math.sqrt((G - 1) / G * np.sum((loo - loo.mean()) ** 2))
        else:
            se = np.nan
        kept.append(lag)
        v_out.append(full)
        se_out.append(se)
    if rejected:
        warnings.warn(f"lags outside the sample grid were rejected: {rejected}")
    base_pts = [float(tg[i]) for i in base_idx]
    return VariogramTable(direction, np.array(kept), np.array(v_out), np.array(se_out), "empirical",
                          base_pts, rejected=rejected)


# ---------------------------------------------------------------------------
# fitting


@dataclass
class ExponentFit:
    exponent: float
    ci: tuple
    slope: float
    slope_se: float
    n_fit: int
    power_ci: tuple
    integrability_exponent: float = None
    integrability_se: float = None
    integrability_ci: tuple = None
    small_lag_ci: tuple = None
    mode: str = "exact"

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _wls(x, y, w):
    X = np.column_stack([np.ones_like(x), x])
    W = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * W[:, None], y * W, rcond=None)
    resid = (y - X @ coef) * W
    dof = max(1, x.size - 2)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv((X * w[:, None]).T @ X)
    return float(coef[1]), float(math.sqrt(max(cov[1, 1], 0.0))), dof


def fit_exponent(table, n_fit=N_FIT, level=0.95):
    """Hoelder exponent slope/2 from the smallest lags, with CI.

    Two estimates are combined: a weighted log-log regression on the
    smallest `n_fit` lags, and the integrability estimate (log-corrected
    regression over all lags, needs >= 12).  The reported CI is the hull of
    both intervals, so a logarithmic correction the power law misses widens
    the interval instead of biasing it.
    """
    lags = np.asarray(table.lags, float)
    vals = np.asarray(table.values, float)
    se = np.asarray(table.stderr, float)
    if lags.size < 8:
        raise ConfigError("fitting needs at least 8 lags")
    order = np.argsort(lags)
    lags, vals, se = lags[order], vals[order], se[order]
    if np.any(vals[:n_fit] <= 0):
        raise DegenerateTableError("non-positive variogram values at the smallest lags",
                                   operation="fit_exponent")
    z = stats.norm.ppf(0.5 + level / 2)

    def fit(nsel):
        x, y = np.log(lags[:nsel]), np.log(vals[:nsel])
        if table.mode == "empirical" and np.all(se[:nsel] > 0):
            w = 1.0 / (se[:nsel] / vals[:nsel]) ** 2
        else:
            w = np.ones(nsel)
        slope, sse, dof = _wls(x, y, w)
        q = stats.t.ppf(0.5 + level / 2, dof)
        return slope, sse, (0.5 * (slope - q * sse), 0.5 * (slope + q * sse))

    slope, sse, pci = fit(n_fit)
    _, _, small = fit(N_SMALL)
    integ = integrability_se = lci = None
    if lags.size >= 12 and np.all(vals > 0):
        res = index_from_integrability(lags, vals, monotone=True, min_lags=12)
        if np.isfinite(res.value):
            integ, integrability_se = 0.5 * res.value, 0.5 * res.stderr
            lci = (integ - z * integrability_se, integ + z * integrability_se)
    lo, hi = pci
    if lci is not None:
        lo, hi = min(lo, lci[0]), max(hi, lci[1])
        small = (min(small[0], lci[0]), max(small[1], lci[1]))
    return ExponentFit(0.5 * slope, (lo, hi), slope, sse, int(n_fit), pci, integ, integrability_se, lci, small,
                       table.mode)


# ---------------------------------------------------------------------------
# classification


@dataclass
class RegularityVerdict:
    kernel_kind: str
    predicted: dict
    fitted: dict
    classification: dict
    agreement: dict
    consistency: bool = True

    def to_dict(self):
        return {"kernel": self.kernel_kind, "predicted": self.predicted,
                "fitted": {k: (v.to_dict() if v is not None else None) for k, v in self.fitted.items()},
                "classification": self.classification, "agreement": self.agreement,
                "consistency": self.consistency}

    def to_csv_rows(self):
        rows = []
        for direction in ("time", "space"):
            p = self.predicted[direction]
            f = self.fitted.get(direction)
            c = self.classification[direction]
            rows.append({"direction": direction, "predicted": p["value"], "predicted_lower": p["lower"],
                         "predicted_upper": p["upper"],
                         "fitted": f.exponent if f else float("nan"),
                         "fitted_lower": f.ci[0] if f else float("nan"),
                         "fitted_upper": f.ci[1] if f else float("nan"),
                         "label": c["label"], "confidence": c["confidence"],
                         "agreement": self.agreement.get(direction)})
        return rows


def predicted_exponents(kind, ind_h, ind_l):
    """Largest L2-increment exponents implied by the indices, as (value, lower, upper)."""
    if kind == "heat":
        t = tuple(0.5 * v for v in ind_h)
    elif kind == "wave":
        t = tuple(min(0.5, v) for v in ind_h)
    else:
        raise ConfigError(f"unknown kernel kind {kind!r}")
    return {"time": dict(zip(("value", "lower", "upper"), t)),
            "space": dict(zip(("value", "lower", "upper"), ind_l))}


def classify(index_report, fitted=None, kind="heat"):
    """Compare fitted exponents with the index predictions for each direction.

    A direction is labelled not-Hoelder only if the index bracket reaches 0;
    confidence is high when the small-lag fit agrees (CI contains 0).
    """
    fitted = dict(fitted or {})
    h, l = index_report.ind_H, index_report.ind_L
    pred = predicted_exponents(kind, (h.value, h.lower, h.upper), (l.value, l.lower, l.upper))
    cls, agree = {}, {}
    for direction, est in (("time", h), ("space", l)):
        p = pred[direction]
        f = fitted.get(direction)
        zero_in_bracket = est.lower <= 0.0
        small_has_zero = f is not None and f.small_lag_ci[0] <= 0.0
        if zero_in_bracket:
            label = "not_holder"
            conf = "high" if small_has_zero else ("low" if f is not None else "index_only")
            rng = (0.0, 0.0)
        else:
            label = "holder"
            conf = "high" if (f is None or not small_has_zero) else "low"
            rng = (0.0, p["value"])
        cls[direction] = {"label": label, "confidence": conf, "range": list(rng)}
        if f is not None:
            overlap = f.ci[0] <= p["upper"] + 1e-12 and f.ci[1] >= p["lower"] - 1e-12
            agree[direction] = "agree" if overlap else "disagree"
    consistent = True
    ft, fs_ = fitted.get("time"), fitted.get("space")
    if ft is not None and fs_ is not None and fs_.ci[0] > 0:
        consistent = ft.ci[0] > 0
    return RegularityVerdict(kind, pred, fitted, cls, agree, consistent)
