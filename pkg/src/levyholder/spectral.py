"""Spectral measures and convergence-aware radial quadrature.

All radial integrals are computed in the log-radius variable u = log r, on
panels between successive cutoffs, with Gauss-Legendre nodes.  Working in u
keeps integrands with slowly varying tails (log factors) well resolved and
allows cutoffs far beyond the floating point range of r itself.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import csv
import io
import math

import numpy as np
from scipy import integrate, special

from ._validation import check_dim, check_increasing, check_scalar
from .errors import ConfigError, IndeterminateError, PanelFailureError

LN2 = math.log(2.0)
SCHEMA = "levyholder.measure/1"


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def sphere_area(dim):
    """Surface measure of the unit sphere in R^dim (2 when dim == 1)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def dyadic_log_cutoffs(kmax=40, kmin=0):
    return np.arange(kmin, kmax + 1) * LN2


def default_cutoffs():
    return 2.0 ** np.arange(0, 41)


# ---------------------------------------------------------------------------
# spectral measures


@dataclass(frozen=True)
class SpectralMeasure:
    """Radial spectral measure mu(dxi) = rho(|xi|) dxi + atom * delta_0."""

    family: str
    dim: int = 1
    params: dict = field(default_factory=dict)
    atom: float = 0.0
    tail_exponent: float = None
    support_radius: float = None
    density: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        check_dim(self.dim)
        check_scalar(self.atom, "atom_at_zero", lo=0.0)
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown spectral family {self.family!r}")
        if self.family == "custom" and self.density is None:
            raise ConfigError("custom measure needs a density callable")

    # --- densities -----------------------------------------------------
    def rho(self, r):
        """Radial density rho(r); r may be an array."""
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return np.exp(self._log_rho(r, np.log(r)))

    def _log_rho(self, r, u):
        fam, p = self.family, self.params
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if fam in ("riesz_like", "harmonic"):
                beta = p.get("beta", 1.0)
                return -beta * np.logaddexp(0.0, u)
            if fam == "gaussian_density":
                s = p.get("scale", 1.0)
                return -0.5 * (s * r) ** 2 - self.dim * 0.5 * math.log(2 * math.pi / s**2)
            if fam == "finite_uniform":
                R, mass = p.get("radius", 1.0), p.get("mass", 1.0)
                vol = sphere_area(self.dim) * R**self.dim / self.dim
                return np.where(r <= R, math.log(mass / vol), -np.inf)
            if fam == "atom_only":
                return np.full(np.shape(u), -np.inf)
            vals = np.asarray(self.density(r), dtype=float)
            return np.log(np.where(vals > 0, vals, 0.0))

    def log_shell_density(self, u):
        """log of omega * rho(e^u) * e^{d u}, the density of mu in d(log r)."""
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore"):
            r = np.exp(u)
        return math.log(sphere_area(self.dim)) + self.dim * u + self._log_rho(r, u)

    @property
    def breakpoints(self):
        return () if self.support_radius is None else (float(self.support_radius),)

    # --- serialization -------------------------------------------------
    def to_config(self):
        if self.family == "custom":
            raise ConfigError("custom measures hold a callable and cannot be serialized")
        return {"schema": SCHEMA, "family": self.family, "dim": self.dim,
                "params": dict(self.params), "atom": self.atom}

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg)
        schema = cfg.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"unsupported measure schema {schema!r}")
        fam = cfg.get("family")
        params = dict(cfg.get("params", {}))
        dim = cfg.get("dim", 1)
        atom = cfg.get("atom", 0.0)
        builders = {
            "riesz_like": lambda: riesz_like(params.get("beta", 1.0), dim=dim, atom=atom),
            "harmonic": lambda: harmonic(atom=atom),
            "gaussian_density": lambda: gaussian_density(params.get("scale", 1.0), dim=dim, atom=atom),
            "finite_uniform": lambda: finite_uniform(params.get("radius", 1.0), params.get("mass", 1.0),
                                                     dim=dim, atom=atom),
            "atom_only": lambda: atom_only(atom, dim=dim),
        }
        if fam not in builders:
            raise ConfigError(f"cannot build measure family {fam!r} from config")
        return builders[fam]()


_FAMILIES = ("riesz_like", "gaussian_density", "harmonic", "finite_uniform", "custom", "atom_only")


def riesz_like(beta, dim=1, atom=0.0):
    """Density (1 + r)^(-beta)."""
    beta = check_scalar(beta, "beta", lo=0.0)
    return SpectralMeasure("riesz_like", dim, {"beta": beta}, atom, tail_exponent=-beta)


def harmonic(atom=0.0):
    """One-dimensional density (1 + |xi|)^(-1)."""
    return SpectralMeasure("harmonic", 1, {"beta": 1.0}, atom, tail_exponent=-1.0)


def gaussian_density(scale=1.0, dim=1, atom=0.0):
    scale = check_scalar(scale, "scale", lo=0.0, lo_open=True)
    return SpectralMeasure("gaussian_density", dim, {"scale": scale}, atom)


def finite_uniform(radius=1.0, mass=1.0, dim=1, atom=0.0):
    """Uniform density on the ball of given radius with total mass `mass`."""
    radius = check_scalar(radius, "radius", lo=0.0, lo_open=True)
    mass = check_scalar(mass, "mass", lo=0.0)
    return SpectralMeasure("finite_uniform", dim, {"radius": radius, "mass": mass}, atom,
                           support_radius=radius)


def atom_only(weight, dim=1):
    return SpectralMeasure("atom_only", dim, {}, float(weight))


def custom(density, dim=1, atom=0.0, tail_exponent=None, support_radius=None, check=True):
    mu = SpectralMeasure("custom", dim, {}, atom, tail_exponent=tail_exponent,
                         support_radius=support_radius, density=density)
    if check:
        check_tempered(mu)
    return mu


def check_tempered(mu):
    """Numerically confirm int (1+|xi|)^(-2d-2) dmu < infinity."""
    n = 2 * mu.dim + 2
    try:
        series = integrate_radial(mu, lambda r: (1.0 + r) ** (-n))
    except PanelFailureError as exc:
        raise ConfigError(f"spectral measure is not tempered ({exc})") from None
    verdict = convergence_verdict(series)
    if not isinstance(verdict, Convergent):
        raise ConfigError("spectral measure is not tempered (polynomially weighted mass diverges)")
    return verdict.value


# ---------------------------------------------------------------------------
# panel quadrature in log-radius


class RadialGrid:
    """Fixed Gauss-Legendre nodes on log-radius panels.

    Panel 0 covers (0, exp(log_cutoffs[0])]; panel k covers
    [log_cutoffs[k-1], log_cutoffs[k]].  A coarse node set of half the size
    gives per-panel error estimates.
    """

    def __init__(self, log_cutoffs, n_nodes=32, refine=1, inner_levels=40, breakpoints=()):
        lc = check_increasing(log_cutoffs, "cutoff schedule", min_len=2)
        self.log_cutoffs = lc
        self.n_nodes = int(n_nodes)
        self.refine = int(refine)
        bps = [math.log(b) for b in breakpoints if b > 0]
        fine, coarse = [], []
        for nodes, store in ((self.n_nodes, fine), (max(self.n_nodes // 2, 2), coarse)):
            us, ws, ids = [], [], []
            # innermost piece in r, then dyadic pieces up to the first cutoff
            r_lo = math.exp(lc[0] - inner_levels * LN2)
            x, w = gauss_legendre(nodes)
            r = 0.5 * r_lo * (x + 1.0)
            us.append(np.log(r))
            ws.append(0.5 * r_lo * w / r)
            ids.append(np.zeros(nodes, dtype=int))
            edges = lc[0] - np.arange(inner_levels, -1, -1) * LN2
            pieces = _split(edges, bps, self.refine)
            for a, b in pieces:
                uu, ww = _gl(a, b, nodes)
                us.append(uu)
                ws.append(ww)
                ids.append(np.zeros(nodes, dtype=int))
            for k in range(1, lc.size):
                for a, b in _split(lc[k - 1:k + 1], bps, self.refine):
                    uu, ww = _gl(a, b, nodes)
                    us.append(uu)
                    ws.append(ww)
                    ids.append(np.full(nodes, k, dtype=int))
            store.extend([np.concatenate(us), np.concatenate(ws), np.concatenate(ids)])
        self.u, self.w, self.panel = fine
        self.u_coarse, self.w_coarse, self.panel_coarse = coarse
        with np.errstate(over="ignore"):
            self.r = np.exp(self.u)
            self.r_coarse = np.exp(self.u_coarse)

    @property
    def n_panels(self):
        return self.log_cutoffs.size

    def panel_bounds(self, k):
        lo = -np.inf if k == 0 else self.log_cutoffs[k - 1]
        return (float(np.exp(lo)), float(np.exp(self.log_cutoffs[k])))

    def measure_factor(self, mu, coarse=False):
        u = self.u_coarse if coarse else self.u
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(mu.log_shell_density(u))

    def panel_sums(self, values, coarse=False):
        w = self.w_coarse if coarse else self.w
        ids = self.panel_coarse if coarse else self.panel
        return np.bincount(ids, weights=w * values, minlength=self.n_panels)

    def series(self, values, values_coarse, constant=0.0):
        """Partial integrals from integrand values (already multiplied by the measure)."""
        for vals, ids in ((values, self.panel), (values_coarse, self.panel_coarse)):
            bad = ~np.isfinite(vals)
            if np.any(bad):
                k = int(ids[np.argmax(bad)])
                raise PanelFailureError(
                    f"non-finite integrand on panel {k} (radii {self.panel_bounds(k)})",
                    panel=k, bounds=self.panel_bounds(k), operation="integrate_radial")
        fine = self.panel_sums(values)
        crs = self.panel_sums(values_coarse, coarse=True)
        return PartialIntegralSeries(self.log_cutoffs.copy(), constant + np.cumsum(fine),
                                     np.abs(fine - crs))


def _gl(a, b, n):
    x, w = gauss_legendre(n)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def _split(edges, breakpoints, refine):
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        cuts = [a] + [p for p in breakpoints if a < p < b] + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            sub = np.linspace(lo, hi, refine + 1)
            out.extend(zip(sub[:-1], sub[1:]))
    return out


def masked_product(f, m):
    """f * m with the convention 0 * anything = 0 where the measure vanishes."""
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(m > 0, f * m, 0.0)


@dataclass
class PartialIntegralSeries:
    log_cutoffs: np.ndarray
    partials: np.ndarray
    errors: np.ndarray

    @property
    def cutoffs(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_cutoffs)

    @classmethod
    def from_partials(cls, cutoffs, partials, errors=None):
        cutoffs = check_increasing(cutoffs, "cutoffs")
        partials = np.asarray(partials, dtype=float)
        errors = np.zeros_like(partials) if errors is None else np.asarray(errors, float)
        return cls(np.log(cutoffs), partials, errors)

    def to_csv(self, path=None):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["cutoff", "partial", "err"])
        for c, p, e in zip(self.cutoffs, self.partials, self.errors):
            wr.writerow([f"{c:.17g}", f"{p:.17g}", f"{e:.17g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def integrate_radial(mu, f, cutoff_schedule=None, *, log_cutoffs=None, n_nodes=32,
                     rtol=1e-10, max_refine=16):
    """Partial integrals of int f(|xi|) mu(dxi) up to each cutoff.

    The atom at zero contributes f(0) * mu{0} to every partial.  Panels whose
    32-vs-16 node discrepancy exceeds `rtol` are refined by bisection in
    log-radius, up to `max_refine` pieces.
    """
    if log_cutoffs is None:
        sched = default_cutoffs() if cutoff_schedule is None else cutoff_schedule
        sched = check_increasing(sched, "cutoff schedule", min_len=2)
        if sched[0] <= 0:
            raise ConfigError("cutoffs must be positive")
        log_cutoffs = np.log(sched)
    return integrate_log_radial(mu, lambda u, r: f(r), log_cutoffs, n_nodes=n_nodes,
                                rtol=rtol, max_refine=max_refine,
                                at_zero=lambda: float(f(np.zeros(1))[0]) if mu.atom else 0.0)


def integrate_log_radial(mu, g, log_cutoffs, *, n_nodes=32, rtol=1e-10, max_refine=16, at_zero=None):
    """Like `integrate_radial` but the integrand is g(u, r) with r = exp(u)."""
    grid = RadialGrid(log_cutoffs, n_nodes=n_nodes, breakpoints=mu.breakpoints)
    vals = masked_product(g(grid.u, grid.r), grid.measure_factor(mu))
    vals_c = masked_product(g(grid.u_coarse, grid.r_coarse), grid.measure_factor(mu, coarse=True))
    const = mu.atom * (at_zero() if at_zero is not None else 0.0)
    series = grid.series(vals, vals_c, const)
    fine = np.diff(np.concatenate([[const], series.partials]))
    bad = series.errors > rtol * np.abs(fine) + 1e-300
    refine = 2
    while np.any(bad) and refine <= max_refine:
        g2 = RadialGrid(log_cutoffs, n_nodes=n_nodes, refine=refine, breakpoints=mu.breakpoints)
        v2 = masked_product(g(g2.u, g2.r), g2.measure_factor(mu))
        s2 = g2.panel_sums(v2)
        if not np.all(np.isfinite(s2)):
            k = int(np.argmax(~np.isfinite(s2)))
            raise PanelFailureError(f"non-finite integrand on panel {k}", panel=k,
                                    bounds=g2.panel_bounds(k), operation="integrate_radial")
        err2 = np.abs(s2 - fine)
        fine = np.where(bad, s2, fine)
        series.errors = np.where(bad, err2, series.errors)
        bad = bad & (err2 > rtol * np.abs(s2) + 1e-300)
        refine *= 2
    series.partials = const + np.cumsum(fine)
    return series


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Convergent:
    value: float
    err: float
    tail_slope: float = -np.inf
    log_power: float = 0.0
    confident: bool = True
    near_boundary: bool = False

    @property
    def converges(self):
        return True


@dataclass
class Divergent:
    growth_slope: float
    tail_slope: float = 0.0
    log_power: float = 0.0
    near_boundary: bool = False

    @property
    def converges(self):
        return False


@dataclass
class TailFit:
    c: float
    s: float
    g: float
    resid: float
    u_last: float
    width: float


def _fit_tail(u, dens):
    y = np.log(dens)
    cols = [np.ones_like(u), u]
    use_log = u.min() > 0.5 and u.max() / u.min() > 1.3 and u.size >= 6
    if use_log:
        cols.append(np.log(u))
    X = np.column_stack(cols)
    scale = np.abs(X).max(axis=0)
    coef, *_ = np.linalg.lstsq(X / scale, y, rcond=None)
    coef = coef / scale
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    g = float(coef[2]) if use_log else 0.0
    return float(coef[0]), float(coef[1]), g, rms


def _tail_integral(c, s, g, U, w):
    """int_U^inf exp(c + s v) v^g dv with a midpoint-bias correction for panel width w."""
    x = 0.5 * s * w
    if abs(x) > 1e-8:
        c = c - math.log(math.sinh(x) / x)
    if s > 0 or (s == 0 and g >= -1):
        return np.inf
    if s == 0:
        return math.exp(c + (g + 1) * math.log(U)) / (-g - 1)
    lead = c + s * U + g * math.log(U)
    if lead < -745:
        return 0.0
    # x = -s t; the integrand e^-x (1 + x/a)^g is negligible beyond x = 60
    a = -s * U
    f = lambda x: math.exp(-x) * (1.0 + x / a) ** g
    edges = (0.0, 0.1, 1.0, 5.0, 20.0, 60.0)
    val = sum(integrate.quad(f, lo, hi, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    return math.exp(lead) * val / (-s)


def convergence_verdict(series, *, slope_threshold=0.2, rtol=1e-4, tail_fraction=0.5,
                        slope_tol=2e-3, resid_max=0.5):
    """Decide whether the improper integral behind `series` converges.

    The per-panel densities (increment / panel width in log-radius) are fitted
    on the tail by log(dens) = c + s*u + g*log(u), i.e. an integrand that
    behaves like r^(s-1) (log r)^g.  The integral converges iff s < 0, or s = 0
    and g < -1.  Convergence is *confident* when s < -slope_threshold and the
    extrapolated value is Cauchy at relative tolerance `rtol`.
    """
    lc = np.asarray(series.log_cutoffs, float)
    S = np.asarray(series.partials, float)
    if S.size < 6:
        raise IndeterminateError("need at least 6 partial integrals", operation="convergence_verdict")
    inc = np.diff(S)
    width = np.diff(lc)
    umid = 0.5 * (lc[1:] + lc[:-1])
    n_tail = max(6, int(math.ceil(tail_fraction * inc.size)))
    sl = slice(inc.size - n_tail, inc.size)
    t_inc, t_w, t_u = inc[sl], width[sl], umid[sl]
    total_err = float(np.sum(series.errors))
    scale = max(abs(S[-1]), 1e-300)
    if np.all(t_inc <= 1e-15 * scale):
        return Convergent(float(S[-1]), total_err)
    pos = t_inc > 1e-15 * scale
    if pos.sum() < 4:
        # the integrand may simply have decayed below roundoff early on
        allpos = inc[1:] > 1e-15 * scale
        if allpos.sum() >= 4:
            _, s_all, _, _ = _fit_tail(umid[1:][allpos], inc[1:][allpos] / width[1:][allpos])
            if s_all < -slope_threshold:
                return Convergent(float(S[-1]), total_err, s_all)
        raise IndeterminateError("tail increments too sparse to classify", operation="convergence_verdict")
    # trailing zeros after positive increments: the integrand has died out
    if not pos[-1] and np.all(~pos[np.argmax(~pos & (np.cumsum(pos) == pos.sum())):]):
        last = np.nonzero(pos)[0][-1]
        if np.all(t_inc[last + 1:] <= 1e-15 * scale):
            return Convergent(float(S[-1]), total_err)
    c, s, g, rms = _fit_tail(t_u[pos], t_inc[pos] / t_w[pos])
    if rms > resid_max:
        raise IndeterminateError(
            f"increments fit neither a convergent nor a divergent profile (rms {rms:.3g})",
            operation="convergence_verdict")
    near = abs(s) < 0.05
    if s < -slope_tol:
        converges = True
    elif s > slope_tol:
        converges = False
    else:
        converges = g < -1.0
        s = 0.0
    if not converges:
        grow = _growth_slope(lc[1:][sl], S[1:][sl])
        return Divergent(grow, s, g, near)
    U = lc[-1]
    tail = _tail_integral(c, s, g, U, t_w[-1])
    value = S[-1] + tail
    # Richardson-style Cauchy check: refit without the last increment
    prev = value
    if pos[:-1].sum() >= 4:
        c2, s2, g2, _ = _fit_tail(t_u[:-1][pos[:-1]], (t_inc / t_w)[:-1][pos[:-1]])
        if abs(s2) <= slope_tol:
            s2 = 0.0
        try:
            tail2 = _tail_integral(c2, s2, g2, lc[-2], t_w[-2])
            prev = S[-2] + tail2
        except (OverflowError, ValueError):
            prev = np.inf
    cauchy = bool(np.isfinite(prev) and abs(value - prev) <= rtol * abs(value))
    err = total_err + (abs(value - prev) if np.isfinite(prev) else abs(tail))
    confident = bool(s < -slope_threshold and cauchy)
    return Convergent(float(value), float(err), s, g, confident, near)


def _growth_slope(u, S):
    m = S > 0
    if m.sum() < 2:
        return 0.0
    return float(np.polyfit(u[m], np.log(S[m]), 1)[0])


# ---------------------------------------------------------------------------
# one-dimensional appendix checks


def log_panel_integral(fun, lo, hi, *, breakpoints=(), n_nodes=32, pieces_per_octave=2):
    """int_lo^hi fun(x) dx on geometric panels (lo > 0), refined near breakpoints."""
    edges = np.geomspace(lo, hi, max(2, int(math.ceil(math.log2(hi / lo) * pieces_per_octave)) + 1))
    edges = np.unique(np.concatenate([edges, [b for b in breakpoints if lo < b < hi]]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        u, w = _gl(math.log(a), math.log(b), n_nodes)
        x = np.exp(u)
        total += float(np.sum(w * x * fun(x)))
    return total


def truncated_power_integral(a, b, c, *, floor=1e-300):
    """int_0^1 ((a eps)^b min 1) eps^(-1-c) d eps for 0 < c < b."""
    lo = max(floor, 1e-12 / max(a, 1.0)) if c > 0 else floor
    lo = min(lo, 1e-3 / max(a, 1.0))
    head = (a**b) * lo ** (b - c) / (b - c) if a * lo < 1 else lo ** (-c) / c
    body = log_panel_integral(lambda e: np.minimum((a * e) ** b, 1.0) * e ** (-1.0 - c), lo, 1.0,
                              breakpoints=(1.0 / a,))
    return head + body


def damped_power_integral(a, b, T=1.0):
    """int_0^T s^(-a) exp(-2 s b) ds for a in (0, 1), b >= 0."""
    lo = 1e-14 * T
    head = lo ** (1 - a) / (1 - a)
    bps = (1.0 / (2 * b),) if b > 0 else ()
    body = log_panel_integral(lambda s: s ** (-a) * np.exp(-2 * s * b), lo, T, breakpoints=bps)
    return head + body


def damped_power_closed_form(a, b, T=1.0):
    """Exact value through the regularized lower incomplete gamma function."""
    if b == 0:
        return T ** (1 - a) / (1 - a)
    x = 2 * b * T
    return special.gamma(1 - a) * special.gammainc(1 - a, x) * (2 * b) ** (a - 1)
