"""Independent ground truth for the test-suite. Nothing here imports levyholder."""
import math
import warnings

import mpmath as mp
import numpy as np
from scipy import integrate


# --- tail-exponent calculus for stable(alpha) / (1 + r)^-beta in d = 1 ---

def golden_ind_h(alpha, beta):
    return min(1.0, max(0.0, (alpha + beta - 1) / alpha))


def golden_ind_l(alpha, beta):
    return min(1.0, max(0.0, (alpha + beta - 1) / 2))


def golden_dalang(alpha, beta):
    return alpha + beta > 1


def weighted_tail_exponent(alpha, beta, a=0.0, two_b=0.0):
    """Exponent p of r^p, the large-r profile of w(r) rho(r) / (1 + psi(r))."""
    return a * alpha + two_b - beta - alpha


GOLDEN = [(a, b) for a in (0.5, 1.0, 1.5) for b in (0.25, 0.5, 1.0)]


# --- closed-form one-frequency time covariances ---

def heat_time_cov(psi, t1, t2):
    """int_0^{t1^t2} e^{-(t1-s) psi} conj(e^{-(t2-s) psi}) ds by direct quadrature."""
    m = min(t1, t2)
    a, b = t1 - m, t2 - m
    # substitute u = m - s so the boundary layer of width 1/Re psi sits at u = 0
    f = lambda u, part: getattr(np.exp(-(a + u) * psi) * np.conj(np.exp(-(b + u) * psi)), part)
    scale = 1.0 / max(abs(psi.real if isinstance(psi, complex) else psi), 1e-300)
    pts = [x for x in scale * 2.0 ** np.arange(-4, 8) if x < m]
    out = 0.0
    for part, unit in (("real", 1.0), ("imag", 1j)):
        out += unit * integrate.quad(f, 0, m, args=(part,), points=pts or None, epsabs=0,
                                     epsrel=1e-13, limit=400)[0]
    return out


def wave_time_cov_mp(psi, t1, t2, dps=30):
    """int_0^{t1^t2} sin(K(t1-s)) sin(K(t2-s)) / K^2 ds in high precision (K = sqrt psi)."""
    with mp.workdps(dps):
        K = mp.sqrt(mp.mpf(psi))
        m = min(t1, t2)
        if K == 0:
            f = lambda s: (t1 - s) * (t2 - s)
        else:
            f = lambda s: mp.sin(K * (t1 - s)) * mp.sin(K * (t2 - s)) / K**2
        n = max(1, int(float(K) * m / math.pi) + 1)
        pts = [m * i / n for i in range(n + 1)]
        return float(mp.quad(f, pts))


def ou_variance(t, re_psi=1.0):
    return (1 - math.exp(-2 * t * re_psi)) / (2 * re_psi) if re_psi > 0 else t


# --- spectral covariance of the linear solutions (d = 1, radial rho) ---

def heat_covariance_1d(alpha, beta, t1, t2, h):
    """(2 pi)^-1 int C_heat(|xi|^alpha) cos(h xi) (1+|xi|)^-beta dxi with scipy's Fourier quadrature."""
    m, d = min(t1, t2), abs(t1 - t2)

    def f(x):
        p = x**alpha
        if p * m < 1e-12:
            c = m * math.exp(-d * p)
        else:
            c = math.exp(-d * p) * -math.expm1(-2 * m * p) / (2 * p)
        return c * (1 + x) ** -beta

    if d > 0:
        # e^{-d |xi|^alpha} cuts the integrand off; integrate a finite range in pieces
        top = (60.0 / d) ** (1.0 / alpha)
        edges = np.concatenate([[0.0], np.geomspace(1e-3, top, 40)])
        val = sum(integrate.quad(f, a, b, weight="cos", wvar=h, limit=400, epsabs=1e-15, epsrel=1e-12)[0]
                  for a, b in zip(edges[:-1], edges[1:]))
    elif h == 0:
        val = sum(integrate.quad(f, a, b, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
                  for a, b in ((0, 1), (1, 100), (100, np.inf)))
    else:
        with warnings.catch_warnings():
            # QAWF flags the slow algebraic decay of the cycle sums; the extrapolated value is fine
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val = integrate.quad(f, 0, np.inf, weight="cos", wvar=h, limlst=200, epsabs=1e-14)[0]
    return val / math.pi


def wave_covariance_1d(alpha, beta, t1, t2, dps=20):
    """Same-site wave covariance for psi = |xi|^alpha, by mpmath on K = |xi|^(alpha/2)."""
    with mp.workdps(dps):
        m = mp.mpf(min(t1, t2))
        D, S = mp.mpf(abs(t1 - t2)), mp.mpf(t1 + t2)
        jac = lambda K: (2 / mp.mpf(alpha)) * K ** (2 / mp.mpf(alpha) - 1)   # dxi/dK
        rho = lambda K: (1 + K ** (2 / mp.mpf(alpha))) ** (-mp.mpf(beta))
        w = lambda K: rho(K) * jac(K) / mp.pi

        def cov(K):
            return (m * mp.cos(K * D) / 2 - (mp.sin(K * S) - mp.sin(K * D)) / (4 * K)) / K**2

        head = mp.quad(lambda K: cov(K) * w(K), [0, mp.mpf(1) / 8, 1])
        tail = mp.quadosc(lambda K: m * mp.cos(K * D) / (2 * K**2) * w(K), [1, mp.inf], omega=D) \
            if D > 0 else mp.quad(lambda K: m / (2 * K**2) * w(K), [1, 10, 100, mp.inf])
        tail -= mp.quadosc(lambda K: mp.sin(K * S) / (4 * K**3) * w(K), [1, mp.inf], omega=S)
        if D > 0:
            tail += mp.quadosc(lambda K: mp.sin(K * D) / (4 * K**3) * w(K), [1, mp.inf], omega=D)
        return float(head + tail)


# --- exponent values ---

def log_squared_psi(xi, dps=20):
    """2 int_0^{1/e} (1 - cos(xi x)) log(1/x) dx / x, split at the cosine periods."""
    xi = abs(float(xi))
    with mp.workdps(dps):
        top = 1 / mp.e
        period = 2 * mp.pi / xi
        n = int(top / period)
        pts = [mp.mpf(0)] + [period * k for k in range(1, n + 1)] + [top]
        return 2 * float(mp.quad(lambda x: 2 * mp.sin(xi * x / 2) ** 2 * mp.log(1 / x) / x, pts))


# --- appendix integrals ---

def truncated_power_exact(a, b, c):
    """int_0^1 ((a e)^b min 1) e^(-1-c) de for 0 < c < b, exactly."""
    if a <= 1:
        return a**b / (b - c)
    return a**c / (b - c) + (a**c - 1) / c


def damped_power_exact(a, b, T=1.0):
    """int_0^T s^-a e^(-2 s b) ds via mpmath's incomplete gamma."""
    if b == 0:
        return T ** (1 - a) / (1 - a)
    with mp.workdps(30):
        return float(mp.gammainc(1 - a, 0, 2 * b * T) * (2 * mp.mpf(b)) ** (a - 1))


def dyadic_lags(k_min, k_max):
    return 2.0 ** -np.arange(k_min, k_max + 1, dtype=float)

