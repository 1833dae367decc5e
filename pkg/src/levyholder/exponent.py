"""Lévy characteristic exponents psi: R^d -> C and structural diagnostics.

Convention: E exp(i xi.X(t)) = exp(-t psi(xi)), so Re psi >= 0 and
psi(-xi) = conj(psi(xi)).
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special

from ._validation import as_points, check_dim, check_scalar
from .errors import ConfigError, IntegrationError
from .spectral import gauss_legendre, sphere_area

SCHEMA = "levyholder.exponent/1"
EULER_GAMMA = float(np.euler_gamma)


def _directions(dim, n=64):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    rr = np.sqrt(1 - z * z)
    return np.column_stack([rr * np.cos(phi), rr * np.sin(phi), z])


class ExponentModel:
    """Base class; subclasses implement `_eval(points)` on an (n, d) array."""

    family = "abstract"
    isotropic = False
    growth = "power"

    def __init__(self, dim=1, symmetric=False, satisfies_rl=False):
        self.dim = check_dim(dim)
        self.symmetric = bool(symmetric)
        self.satisfies_rl = bool(satisfies_rl)

    def __call__(self, xi):
        return eval_psi(self, xi)

    def _eval(self, pts):
        raise NotImplementedError

    def _eval_radius(self, u):
        """psi on the ray through the first direction at radius exp(u) (isotropic only)."""
        with np.errstate(over="ignore"):
            r = np.exp(np.asarray(u, float))
        pts = np.zeros((r.size, self.dim))
        pts[:, 0] = r
        return self._eval(pts)

    @property
    def directions(self):
        return np.ones((1, self.dim)) if self.isotropic else _directions(self.dim)

    def shell(self, u):
        """psi at radius exp(u) along each direction: array (len(u), n_dir)."""
        u = np.atleast_1d(np.asarray(u, float))
        if self.isotropic:
            return self._eval_radius(u)[:, None]
        dirs = self.directions
        with np.errstate(over="ignore", invalid="ignore"):
            r = np.exp(u)
            pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, self.dim)
        return self._eval(pts).reshape(u.size, dirs.shape[0])

    def params(self):
        return {}

    def to_config(self):
        return {"schema": SCHEMA, "family": self.family, "dim": self.dim, "params": self.params()}

    def __repr__(self):
        ps = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({ps}{', ' if ps else ''}dim={self.dim})"


def eval_psi(model, xi):
    """Evaluate psi at one frequency (scalar/vector) or a batch of frequencies."""
    pts, scalar = as_points(xi, model.dim)
    out = np.asarray(model._eval(pts), dtype=complex)
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# closed-form families


class Brownian(ExponentModel):
    family = "brownian"

    def __init__(self, A=None, dim=1):
        dim = check_dim(dim)
        A = np.eye(dim) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape != (dim, dim):
            raise ConfigError(f"diffusion matrix must be {dim}x{dim}")
        if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ConfigError("diffusion matrix must be symmetric")
        ev = np.linalg.eigvalsh(A)
        norm = max(abs(ev).max(), 1e-300)
        if ev.min() < -1e-12 * norm:
            raise ConfigError("diffusion matrix must be positive semidefinite")
        super().__init__(dim, symmetric=True, satisfies_rl=bool(ev.min() > 1e-12 * norm))
        self.A = A
        self.isotropic = bool(np.allclose(A, A[0, 0] * np.eye(dim)))

    def _eval(self, pts):
        with np.errstate(over="ignore", invalid="ignore"):
            return 0.5 * np.einsum("ni,ij,nj->n", pts, self.A, pts).astype(complex)

    def _eval_radius(self, u):
        with np.errstate(over="ignore"):
            return (0.5 * self.A[0, 0] * np.exp(2 * np.asarray(u, float))).astype(complex)

    def params(self):
        return {"A": self.A.tolist()}


class IsotropicStable(ExponentModel):
    family = "isotropic_stable"
    isotropic = True

    def __init__(self, alpha, dim=1):
        alpha = check_scalar(alpha, "alpha", lo=0.0, hi=2.0, lo_open=True, hi_open=True)
        super().__init__(dim, symmetric=True, satisfies_rl=True)
        self.alpha = alpha

    def _eval(self, pts):
        return (np.linalg.norm(pts, axis=1) ** self.alpha).astype(complex)

    def _eval_radius(self, u):
        with np.errstate(over="ignore"):
            return np.exp(self.alpha * np.asarray(u, float)).astype(complex)

    def params(self):
        return {"alpha": self.alpha}


class AsymmetricCauchy(ExponentModel):
    """psi(xi) = |xi| + i h xi log|xi| in one dimension, |h| <= 2/pi."""

    family = "asymmetric_cauchy"

    def __init__(self, h):
        h = check_scalar(h, "h", lo=-2 / np.pi, hi=2 / np.pi)
        super().__init__(1, symmetric=(h == 0.0), satisfies_rl=True)
        self.h = h
        self.isotropic = h == 0.0

    def _eval(self, pts):
        x = pts[:, 0]
        a = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), 0.0)
        return a + 1j * self.h * x * lg

    def params(self):
        return {"h": self.h}


class CompoundPoisson(ExponentModel):
    """Finite Lévy measure: point masses and/or a centred Gaussian jump law.

    psi(xi) = -i drift.xi + sum_j w_j (1 - exp(i y_j.xi)) + rate (1 - exp(-scale^2 |xi|^2 / 2)).
    """

    family = "compound_poisson"
    growth = "bounded"

    def __init__(self, atoms=(), gaussian_rate=0.0, gaussian_scale=1.0, drift=None, dim=1):
        dim = check_dim(dim)
        locs, wts = [], []
        for loc, w in atoms:
            locs.append(np.atleast_1d(np.asarray(loc, float)))
            wts.append(check_scalar(w, "jump weight", lo=0.0))
        self.locations = np.array(locs).reshape(-1, dim) if locs else np.zeros((0, dim))
        self.weights = np.array(wts, dtype=float)
        self.gaussian_rate = check_scalar(gaussian_rate, "gaussian_rate", lo=0.0)
        self.gaussian_scale = check_scalar(gaussian_scale, "gaussian_scale", lo=0.0)
        self.drift = np.zeros(dim) if drift is None else np.atleast_1d(np.asarray(drift, float))
        sym = bool(np.all(self.drift == 0) and _atoms_symmetric(self.locations, self.weights))
        super().__init__(dim, symmetric=sym, satisfies_rl=False)
        self.isotropic = sym and self.locations.shape[0] == 0

    @property
    def total_mass(self):
        return float(self.weights.sum() + self.gaussian_rate)

    def _eval(self, pts):
        out = -1j * (pts @ self.drift)
        if self.weights.size:
            ph = pts @ self.locations.T
            out = out + ((1.0 - np.exp(1j * ph)) * self.weights).sum(axis=1)
        if self.gaussian_rate:
            q = np.sum(pts**2, axis=1) * self.gaussian_scale**2
            out = out + self.gaussian_rate * (-np.expm1(-0.5 * q))
        return out

    def params(self):
        return {"atoms": [[loc.tolist(), float(w)] for loc, w in zip(self.locations, self.weights)],
                "gaussian_rate": self.gaussian_rate, "gaussian_scale": self.gaussian_scale,
                "drift": self.drift.tolist()}


def _atoms_symmetric(locs, wts):
    if locs.shape[0] == 0:
        return True
    for loc, w in zip(locs, wts):
        match = np.all(np.isclose(locs, -loc), axis=1) & np.isclose(wts, w)
        if not match.any():
            return False
    return True


# ---------------------------------------------------------------------------
# the log-squared exponent


@lru_cache(maxsize=None)
def _log_squared_constants():
    # c0 = int_0^1 (1 - cos y) log(y) / y dy ;  c1 = int_1^inf cos(y) log(y) / y dy
    c0, _ = integrate.quad(lambda y: (1 - math.cos(y)) * math.log(y) / y if y > 0 else 0.0,
                           0.0, 1.0, limit=200, epsabs=1e-15, epsrel=1e-13)
    z0 = 400.0
    edges = np.concatenate([[1.0], np.arange(1, int(z0 / np.pi) + 1) * np.pi, [z0]])
    head = sum(integrate.quad(lambda y: math.cos(y) * math.log(y) / y, a, b, epsabs=1e-16)[0]
               for a, b in zip(edges[:-1], edges[1:]) if b > a)
    return c0, head + float(_cos_tail_log_over_y(z0))


def _cos_tail_log_over_y(Z):
    """int_Z^inf cos(y) log(y)/y dy by repeated integration by parts (Z >= 50)."""
    Z = np.asarray(Z, float)
    L = np.log(Z)
    with np.errstate(over="ignore"):
        Z2, Z3, Z4, Z5 = Z**2, Z**3, Z**4, Z**5
    g0 = L / Z
    g1 = (1 - L) / Z2
    g2 = (2 * L - 3) / Z3
    g3 = (11 - 6 * L) / Z4
    g4 = (24 * L - 50) / Z5
    s, c = np.sin(Z), np.cos(Z)
    return -g0 * s - g1 * c + g2 * s + g3 * c - g4 * s


class LogSquared(ExponentModel):
    """Symmetric one-dimensional exponent with Lévy density -log|x|/|x| on 0<|x|<1/e.

    psi(xi) = 2 int_0^{1/e} (1 - cos(xi x)) log(1/x) dx/x, which grows like
    (log xi)^2.  Moderate |xi| use direct quadrature (with the (xi x)^2/2
    expansion below xi x = 1e-4); large |xi| use an exact rearrangement in
    terms of the cosine integral plus an asymptotic oscillatory tail.
    """

    family = "log_squared"
    isotropic = True
    growth = "log"
    direct_limit = 200.0 * math.e
    switch = 1e-4

    def __init__(self):
        super().__init__(1, symmetric=True, satisfies_rl=True)

    def _direct(self, xi):
        x0 = 1 / math.e if xi * math.e <= self.switch else self.switch / xi
        # int_0^x0 (xi x)^2/2 log(1/x) dx/x = xi^2/2 [x^2/2 log(1/x) + x^2/4]_0^x0
        head = 0.5 * xi**2 * (0.5 * x0**2 * math.log(1 / x0) + 0.25 * x0**2)
        if x0 >= 1 / math.e:
            return 2 * head
        f = lambda x: 2.0 * math.sin(0.5 * xi * x) ** 2 * math.log(1 / x) / x
        brk = list(np.arange(1, int(xi / (2 * math.pi * math.e)) + 1) * 2 * math.pi / xi)
        brk = [b for b in brk if x0 < b < 1 / math.e][:200]
        body, _ = integrate.quad(f, x0, 1 / math.e, points=brk or None, limit=500,
                                 epsabs=1e-14, epsrel=1e-12)
        return 2 * (head + body)

    def _asymptotic(self, xi):
        c0, c1 = _log_squared_constants()
        L = np.log(xi)
        Z = xi / math.e
        _, ci = special.sici(Z)
        T = _cos_tail_log_over_y(Z)
        logZ = L - 1.0
        return 2 * L * (EULER_GAMMA + logZ - ci) - 2 * c0 - logZ**2 + 2 * c1 - 2 * T

    def log_radius_value(self, u):
        """psi at radius exp(u), valid far beyond the float range of the radius."""
        u = np.asarray(u, float)
        out = np.empty_like(u)
        big = u > 700.0
        c0, c1 = _log_squared_constants()
        L = u[big]
        out[big] = 2 * L * (EULER_GAMMA + L - 1) - 2 * c0 - (L - 1) ** 2 + 2 * c1
        small = ~big
        if small.any():
            out[small] = self._eval_abs(np.exp(u[small]))
        return out

    def _eval_abs(self, a):
        a = np.asarray(a, float)
        out = np.zeros_like(a)
        for i, v in enumerate(a):
            if v == 0:
                continue
            out[i] = self._direct(v) if v <= self.direct_limit else self._asymptotic(v)
        return out

    def _eval(self, pts):
        return self._eval_abs(np.abs(pts[:, 0])).astype(complex)

    def _eval_radius(self, u):
        return self.log_radius_value(u).astype(complex)


# ---------------------------------------------------------------------------
# numeric Lévy-Khintchine triplets


@dataclass(frozen=True)
class LevyTriplet:
    """Drift a, diffusion A = Q'Q and a jump density on inner < |y| < outer.

    ``jump_spec`` is a serializable description: {"kind": "none"},
    {"kind": "power", "alpha": a, "coef_pos": c+, "coef_neg": c-} for
    c_pm |y|^(-d-a), or {"kind": "log_squared"} for -log|y|/|y| on |y| < 1/e.
    In dimension > 1 the jump density must be radial (coef_pos == coef_neg).
    """

    drift: tuple = (0.0,)
    diffusion: tuple = ((0.0,),)
    jump_spec: dict = field(default_factory=lambda: {"kind": "none"})
    inner_cutoff: float = 1e-8
    outer_cutoff: float = 1e3
    jump_density: object = field(default=None, compare=False, repr=False)

    @property
    def dim(self):
        return len(self.drift)

    def density_pair(self):
        """Return (nu_plus, nu_minus) radial profiles, or None if no jumps."""
        if self.jump_density is not None:
            f = self.jump_density
            return (f, lambda r: f(-r)) if self.dim == 1 else (f, f)
        kind = self.jump_spec.get("kind", "none")
        d = self.dim
        if kind == "none":
            return None
        if kind == "power":
            a = self.jump_spec["alpha"]
            cp = self.jump_spec.get("coef_pos", 1.0)
            cn = self.jump_spec.get("coef_neg", cp)
            return (lambda r: cp * r ** (-d - a), lambda r: cn * r ** (-d - a))
        if kind == "log_squared":
            f = lambda r: np.where(r < 1 / math.e, -np.log(r) / r, 0.0)
            return (f, f)
        raise ConfigError(f"unknown jump density kind {kind!r}")


def _panels(lo, hi, per_octave=2):
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    n = max(1, int(math.ceil(math.log2(hi / lo) * per_octave)))
    e = np.geomspace(lo, hi, n + 1)
    return e[:-1], e[1:]


class NumericTriplet(ExponentModel):
    family = "numeric_triplet"

    def __init__(self, triplet, symmetric=None):
        d = triplet.dim
        A = np.atleast_2d(np.asarray(triplet.diffusion, float))
        self.brownian = Brownian(A, dim=d)
        self.triplet = triplet
        self.drift = np.asarray(triplet.drift, float)
        dens = triplet.density_pair()
        if dens is not None and d > 1 and triplet.jump_spec.get("coef_pos", 1) != triplet.jump_spec.get(
                "coef_neg", triplet.jump_spec.get("coef_pos", 1)):
            raise ConfigError("jump densities in dimension > 1 must be radial")
        self.dens = dens
        if symmetric is None:
            spec = triplet.jump_spec
            symmetric = bool(np.all(self.drift == 0) and (
                dens is None or spec.get("kind") == "log_squared"
                or (spec.get("kind") == "power" and spec.get("coef_neg", spec.get("coef_pos", 1.0))
                    == spec.get("coef_pos", 1.0))))
        rl = self.brownian.satisfies_rl or (dens is not None and triplet.jump_spec.get("kind") in
                                           ("power", "log_squared") and triplet.inner_cutoff <= 1e-6)
        super().__init__(d, symmetric=symmetric, satisfies_rl=rl)
        self.isotropic = bool(self.brownian.isotropic and np.all(self.drift == 0) and symmetric)
        if triplet.jump_spec.get("kind") == "log_squared" and not self.brownian.satisfies_rl:
            self.growth = "log"
        if dens is not None:
            self.levy_mass = self._check_integrability()

    def _check_integrability(self):
        """int (1 ^ |y|^2) nu(dy); raises if the declared cutoffs make it blow up."""
        t = self.triplet
        fp, fn = self.dens
        om = sphere_area(self.dim) if self.dim > 1 else 1.0
        x, w = gauss_legendre(32)
        lo, hi = _panels(t.inner_cutoff, t.outer_cutoff)
        pieces = []
        for a, b in zip(lo, hi):
            y = 0.5 * (a + b) + 0.5 * (b - a) * x
            wt = 0.5 * (b - a) * w
            nu = fp(y) + fn(y) if self.dim == 1 else om * fp(y) * y ** (self.dim - 1)
            pieces.append(float(np.sum(wt * np.minimum(1.0, y**2) * nu)))
        pieces = np.array(pieces)
        total = float(pieces.sum())
        if not np.isfinite(total):
            raise IntegrationError("jump integral is not finite", partial=total,
                                   operation="numeric_triplet")
        # a non-integrable singularity at the inner cutoff shows as non-decaying panels
        if pieces.size > 6 and pieces[0] > 0 and pieces[0] >= 0.95 * pieces[2] and t.inner_cutoff < 1e-3:
            raise IntegrationError("jump integral diverges at the inner cutoff", partial=total,
                                   operation="numeric_triplet")
        n = pieces.size
        if n > 6 and pieces[-1] > 0 and pieces[-1] >= 0.95 * pieces[-3] and t.outer_cutoff > 1e3:
            raise IntegrationError("jump integral diverges at the outer cutoff", partial=total,
                                   operation="numeric_triplet")
        return total

    def _jump_term(self, pts):
        t = self.triplet
        fp, fn = self.dens
        x, w = gauss_legendre(32)
        out = np.zeros(pts.shape[0], dtype=complex)
        norms = np.linalg.norm(pts, axis=1)
        for i, (xi, q) in enumerate(zip(pts, norms)):
            if q == 0:
                continue
            edges = []
            for lo, hi in ((t.inner_cutoff, min(1.0, t.outer_cutoff)), (max(1.0, t.inner_cutoff), t.outer_cutoff)):
                a, b = _panels(lo, hi)
                for aa, bb in zip(a, b):
                    m = int(min(4096, max(1, math.ceil(q * (bb - aa) / math.pi))))
                    sub = np.linspace(aa, bb, m + 1)
                    edges.append(np.column_stack([sub[:-1], sub[1:]]))
            E = np.concatenate(edges)
            y = (0.5 * (E[:, 0] + E[:, 1])[:, None] + 0.5 * (E[:, 1] - E[:, 0])[:, None] * x).ravel()
            wt = (0.5 * (E[:, 1] - E[:, 0])[:, None] * w).ravel()
            z = q * y
            small = z < 1e-4
            one_m_cos = np.where(small, z**2 / 2 - z**4 / 24, 2 * np.sin(0.5 * z) ** 2)
            if self.dim == 1:
                sgn = np.sign(xi[0])
                z_minus_sin = np.where(small, z**3 / 6, z - np.sin(z))
                comp = np.where(y <= 1.0, z_minus_sin, -np.sin(z))
                nup, nun = fp(y), fn(y)
                if sgn < 0:
                    nup, nun = nun, nup
                re = np.sum(wt * (nup + nun) * one_m_cos)
                im = np.sum(wt * (nup - nun) * comp)
                out[i] = re + 1j * im
            else:
                nu = fp(y)
                if self.dim == 2:
                    avg = np.where(small, z**2 / 4, 1 - special.j0(z))
                else:
                    avg = np.where(small, z**2 / 6, 1 - np.sin(z) / z)
                out[i] = sphere_area(self.dim) * np.sum(wt * nu * y ** (self.dim - 1) * avg)
        return out

    def _eval(self, pts):
        out = self.brownian._eval(pts) - 1j * (pts @ self.drift)
        if self.dens is not None:
            out = out + self._jump_term(pts)
        return out

    def params(self):
        t = self.triplet
        if t.jump_density is not None:
            raise ConfigError("triplets with a callable jump density cannot be serialized")
        return {"drift": list(map(float, t.drift)), "diffusion": np.asarray(t.diffusion, float).tolist(),
                "jump_spec": dict(t.jump_spec), "inner_cutoff": t.inner_cutoff,
                "outer_cutoff": t.outer_cutoff}


# ---------------------------------------------------------------------------
# fractional powers


class Fractional(ExponentModel):
    family = "fractional"

    def __init__(self, base, tau):
        tau = check_scalar(tau, "tau", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
        if not base.symmetric:
            raise ConfigError("fractional powers are only defined here for symmetric exponents")
        super().__init__(base.dim, symmetric=True, satisfies_rl=base.satisfies_rl)
        self.base, self.tau = base, tau
        self.isotropic = base.isotropic
        self.growth = base.growth

    def _eval(self, pts):
        v = np.clip(self.base._eval(pts).real, 0.0, None)
        return (v**self.tau).astype(complex)

    def _eval_radius(self, u):
        v = np.clip(self.base._eval_radius(u).real, 0.0, None)
        return (v**self.tau).astype(complex)

    def params(self):
        return {"base": self.base.to_config(), "tau": self.tau}


def fractional_power(model, tau):
    """Exponent psi^tau of the process subordinated by an independent tau-stable subordinator."""
    if not model.symmetric:
        raise ConfigError("fractional_power requires a symmetric exponent (psi real and even)")
    if isinstance(model, IsotropicStable):
        tau = check_scalar(tau, "tau", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
        return IsotropicStable(model.alpha * tau, dim=model.dim)
    return Fractional(model, tau)


# ---------------------------------------------------------------------------
# factories and config


def brownian(A=None, dim=1):
    return Brownian(A, dim)


def isotropic_stable(alpha, dim=1):
    return IsotropicStable(alpha, dim)


def asymmetric_cauchy(h):
    return AsymmetricCauchy(h)


def compound_poisson(atoms=(), gaussian_rate=0.0, gaussian_scale=1.0, drift=None, dim=1):
    return CompoundPoisson(atoms, gaussian_rate, gaussian_scale, drift, dim)


def log_squared():
    return LogSquared()


def numeric_triplet(triplet):
    return NumericTriplet(triplet)


def from_config(cfg):
    cfg = dict(cfg)
    schema = cfg.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported exponent schema {schema!r}")
    fam = cfg.get("family")
    p = dict(cfg.get("params", {}))
    dim = cfg.get("dim", 1)
    try:
        if fam == "brownian":
            return Brownian(p.get("A"), dim)
        if fam == "isotropic_stable":
            return IsotropicStable(p["alpha"], dim)
        if fam == "asymmetric_cauchy":
            return AsymmetricCauchy(p["h"])
        if fam == "compound_poisson":
            return CompoundPoisson(p.get("atoms", ()), p.get("gaussian_rate", 0.0),
                                   p.get("gaussian_scale", 1.0), p.get("drift"), dim)
        if fam == "log_squared":
            return LogSquared()
        if fam == "numeric_triplet":
            t = LevyTriplet(tuple(p.get("drift", [0.0] * dim)),
                            tuple(map(tuple, p.get("diffusion", [[0.0] * dim] * dim))),
                            dict(p.get("jump_spec", {"kind": "none"})),
                            p.get("inner_cutoff", 1e-8), p.get("outer_cutoff", 1e3))
            return NumericTriplet(t)
        if fam == "fractional":
            return fractional_power(from_config(p["base"]), p["tau"])
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc} for exponent family {fam!r}") from None
    raise ConfigError(f"unknown exponent family {fam!r}")


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class StructureReport:
    min_abs_off_zero: float
    bochner_ratio: float
    shell_radii: list
    shell_bochner: list
    shell_min: list
    outer_shell_min: float
    rl_trend: str
    symmetry_residual: float
    evenness_residual: float
    min_real_part: float
    max_real_part: float

    def to_dict(self):
        return dict(self.__dict__)


def diagnostic_grid(dim, n_shells=8, n_dir=64, r_max=256.0):
    """Points on dyadic shells r_max 2^-(n_shells-1) .. r_max; list of (n, d) arrays."""
    shells = []
    radii = r_max * 2.0 ** -np.arange(n_shells - 1, -1, -1)
    for R in radii:
        if dim == 1:
            r = np.linspace(R / 2, R, n_dir // 2 + 1)[1:]
            shells.append(np.concatenate([r, -r])[:, None])
        else:
            shells.append(R * _directions(dim, n_dir))
    return radii, shells


def diagnose(model, grid=None):
    """Report-only structure diagnostics on dyadic shells."""
    radii, shells = diagnostic_grid(model.dim) if grid is None else grid
    sb, smin, smax = [], [], []
    sym = even = 0.0
    min_abs, min_re, max_re = np.inf, np.inf, -np.inf
    for pts in shells:
        v = eval_psi(model, pts)
        vm = eval_psi(model, -pts)
        nrm = np.sum(pts**2, axis=1)
        sb.append(float(np.max(np.abs(v) / (1 + nrm))))
        smin.append(float(np.min(np.abs(v))))
        smax.append(float(np.max(np.abs(v))))
        scale = max(1.0, float(np.max(np.abs(v))))
        sym = max(sym, float(np.max(np.abs(v - np.conj(vm)))) / scale)
        even = max(even, float(np.max(np.abs(v - vm))) / scale)
        min_abs = min(min_abs, float(np.min(np.abs(v))))
        min_re = min(min_re, float(np.min(v.real)))
        max_re = max(max_re, float(np.max(v.real)))
    mid, last = smin[len(smin) // 2], smin[-1]
    if last >= 1.5 * mid and smin[-1] >= smin[-2]:
        trend = "increasing"
    elif last <= mid / 1.5 and smax[-1] <= smax[len(smax) // 2] / 1.5:
        # bounded oscillating exponents dip near their zeros; only a shrinking envelope counts
        trend = "decreasing"
    else:
        trend = "flat"
    return StructureReport(min_abs, float(max(sb)), [float(r) for r in radii], sb, smin, last, trend,
                           sym, even, min_re, max_re)
