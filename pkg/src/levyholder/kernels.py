"""Fourier-side fundamental solutions of the heat and wave operators.

heat: h(t, xi) = exp(-t psi(xi));  wave: h(t, xi) = t sinc(t sqrt(psi(xi))).
All time integrals needed downstream have closed forms collected here.  The
(2 pi)^(-d) normalization of field covariances is *not* applied in this module.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from .errors import ConfigError
from .exponent import eval_psi

SERIES_SWITCH = 1e-6


def sinc(x):
    """sin(x)/x with sinc(0) = 1 (unnormalized)."""
    return np.sinc(np.asarray(x) / np.pi)


def one_minus_sinc(x):
    x = np.asarray(x, float)
    small = np.abs(x) < 1e-3
    x2 = x * x
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = 1.0 - sinc(x)
    return np.where(small, x2 / 6 - x2 * x2 / 120 + x2**3 / 5040, direct)


@dataclass(frozen=True)
class Kernel:
    kind: str
    exponent: object

    def __post_init__(self):
        if self.kind not in ("heat", "wave"):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "wave":
            if not self.exponent.symmetric:
                raise ConfigError("the wave kernel needs a symmetric (real, nonnegative) exponent")
            if not self.exponent.satisfies_rl:
                raise ConfigError("the wave kernel needs an exponent that grows to infinity")

    # --- pointwise ------------------------------------------------------
    def hat(self, t, psi):
        """Kernel value from exponent values psi (array) at time t."""
        t = float(t)
        psi = np.asarray(psi)
        if self.kind == "heat":
            z = t * psi
            return np.where(np.abs(z) < SERIES_SWITCH, 1 - z + 0.5 * z * z, np.exp(-z))
        K = _root(psi)
        z = t * t * K * K
        return np.where(z < SERIES_SWITCH, t * (1 - z / 6), t * sinc(t * K))

    # --- closed-form time integrals --------------------------------------
    def covariance(self, psi, t1, t2):
        """int_0^{t1 ^ t2} h(t1 - s) conj(h(t2 - s)) ds, elementwise in psi."""
        psi = np.asarray(psi, dtype=complex) if self.kind == "heat" else _root(psi)
        if self.kind == "heat":
            lo, hi = (t1, t2) if t1 <= t2 else (t2, t1)
            v = _ou_var(psi.real, lo)
            ph = np.exp(-(hi - lo) * (np.conj(psi) if t1 <= t2 else psi))
            return ph * v
        return _wave_cov(psi, t1, t2)

    def energy(self, psi, T):
        """int_0^T |h(s)|^2 ds."""
        if self.kind == "heat":
            return _ou_var(np.asarray(psi).real, T)
        K = _root(psi)
        with np.errstate(invalid="ignore", divide="ignore"):
            big = T * T * T * one_minus_sinc(2 * K * T) / (2 * (K * T) ** 2)
        return np.where(K * T < 1e-3, T**3 / 3 - K * K * T**5 / 15, big)

    def weighted_energy(self, psi, b):
        """int_0^1 s^(-b) |h(s)|^2 ds for b in [0, 1)."""
        if self.kind == "heat":
            x = 2 * np.asarray(psi).real
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                full = special.gamma(1 - b) * special.gammainc(1 - b, x) * x ** (b - 1)
            return np.where(x < 1e-8, 1 / (1 - b) - x / (2 - b), full)
        return _wave_weighted(_root(psi), b)

    def increment_energy(self, psi, eps, T, smoothing=0.0):
        """int_0^T |h(s + eps) - h(s)|^2 ds.

        With smoothing = delta > 0 the oscillating factors are averaged over a
        Gaussian log-frequency window of relative width delta, which leaves
        the non-oscillating part intact and removes phases that a quadrature
        rule on log-radius panels cannot resolve.
        """
        if self.kind == "heat":
            psi = np.asarray(psi, dtype=complex)
            R, I = psi.real, psi.imag
            y = 0.5 * eps * I
            sin2 = np.sin(y) ** 2
            if smoothing > 0:
                sin2 = 0.5 - 0.5 * np.cos(2 * y) * np.exp(-2 * (y * smoothing) ** 2)
            gap = np.expm1(-eps * R) ** 2 + 4 * np.exp(-eps * R) * sin2
            return gap * _ou_var(R, T)
        K = _root(psi)
        y = 0.5 * eps * K
        x = (2 * T + eps) * K
        if smoothing <= 0:
            amp = eps * eps * sinc(y) ** 2
            osc = 0.5 * T + 0.25 * ((2 * T + eps) * sinc(x) - eps * sinc(2 * y))
            return amp * osc
        damp = lambda z: np.exp(-0.5 * (z * smoothing) ** 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            sin2 = 0.5 - 0.5 * np.cos(2 * y) * damp(2 * y)
            amp = np.where(y < 1e-3, eps * eps * sinc(y) ** 2, sin2 / np.where(K > 0, K * K / 4, 1.0))
            osc = 0.5 * T + 0.25 * ((2 * T + eps) * sinc(x) * damp(x) - eps * sinc(2 * y) * damp(2 * y))
        return amp * osc


def _root(psi):
    psi = np.asarray(psi)
    if np.iscomplexobj(psi):
        psi = psi.real
    return np.sqrt(np.clip(psi, 0.0, None))


def _ou_var(R, t):
    """(1 - exp(-2 t R)) / (2 R) with the R -> 0 limit t."""
    R = np.asarray(R, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = -np.expm1(-2 * t * R) / (2 * R)
    return np.where(R * t < 1e-300, t, v)


def _wave_cov(K, t1, t2):
    m, D = min(t1, t2), abs(t2 - t1)
    S = 2 * m + D
    K = np.asarray(K, float)
    small = K * S < 0.05
    K2 = K * K
    # series: coefficients of K^0, K^2, K^4
    p4 = S**4 + S**3 * D + S * S * D * D + S * D**3 + D**4
    p6 = sum(S ** (6 - j) * D**j for j in range(7))
    ser = (m * m * (S + 2 * D) / 6
           + K2 * (m * D**4 / 48 - 2 * m * p4 / 480)
           + K2 * K2 * (-m * D**6 / 1440 + 2 * m * p6 / 20160))
    with np.errstate(invalid="ignore", divide="ignore"):
        num = m * np.cos(D * K) - 0.5 * (S * sinc(S * K) - D * sinc(D * K))
        full = num / (2 * K2)
    return np.where(small, ser, full)


def _wave_weighted(K, b, k_switch=2000.0):
    """int_0^1 s^(2-b) sinc(s K)^2 ds."""
    K = np.atleast_1d(np.asarray(K, float))
    out = np.empty_like(K)
    big = K > k_switch
    if big.any():
        Kb = K[big]
        X = 2 * Kb
        tail = -X ** (-b) * np.sin(X) + b * X ** (-b - 1) * np.cos(X)
        cos_int = X ** (b - 1) * (special.gamma(1 - b) * math.cos(0.5 * math.pi * (1 - b)) - tail)
        out[big] = (0.5 / (1 - b) - 0.5 * cos_int) / (Kb * Kb)
    small = ~big
    if small.any():
        Ks = K[small]
        n_pan = int(max(8, math.ceil(Ks.max() / math.pi) + 2))
        x, w = np.polynomial.legendre.leggauss(24)
        edges = np.linspace(0.0, 1.0, n_pan + 1) ** 2  # graded toward s = 0
        a, c = edges[:-1], edges[1:]
        s = (0.5 * (a + c)[:, None] + 0.5 * (c - a)[:, None] * x).ravel()
        ws = (0.5 * (c - a)[:, None] * w).ravel()
        vals = s[None, :] ** (2 - b) * sinc(np.outer(Ks, s)) ** 2
        # first panel: Gauss-Jacobi absorbs the s^(2-b) endpoint behaviour
        w_mask = s > c[0]
        a1 = c[0]
        xj, wj = special.roots_jacobi(24, 0.0, 2 - b)
        sj = 0.5 * a1 * (xj + 1)
        wj = wj * (0.5 * a1) ** (3 - b)
        out[small] = vals[:, w_mask] @ ws[w_mask] + sinc(np.outer(Ks, sj)) ** 2 @ wj
    return out


# --- public operations ------------------------------------------------------


def heat_kernel(exponent):
    return Kernel("heat", exponent)


def wave_kernel(exponent):
    return Kernel("wave", exponent)


def eval_hat(kernel, t, xi):
    if t < 0:
        raise ConfigError("time must be nonnegative")
    psi = eval_psi(kernel.exponent, xi)
    out = kernel.hat(t, psi)
    return complex(out) if np.ndim(out) == 0 else out


def time_covariance(kernel, psi_val, t1, t2):
    """Closed-form per-frequency covariance factor C(t1, t2)."""
    if t1 < 0 or t2 < 0:
        raise ConfigError("times must be nonnegative")
    if kernel.kind == "wave" and abs(np.imag(psi_val)) > 1e-12 * max(1.0, abs(psi_val)):
        raise ConfigError("wave kernel covariance needs real psi")
    out = kernel.covariance(psi_val, t1, t2)
    return complex(out) if np.ndim(out) == 0 else out


def covariance_matrix(kernel, psi_val, times):
    """Hermitian matrix [C(t_i, t_j)] for one frequency."""
    n = len(times)
    C = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            C[i, j] = kernel.covariance(psi_val, times[i], times[j])
            C[j, i] = np.conj(C[i, j])
    return C
