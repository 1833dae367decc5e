"""Acceptance criteria; each test prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from levyholder import exponent as ex
from levyholder import fieldsim as fs
from levyholder import indices as ix
from levyholder import regularity as rg
from levyholder import spectral as sp
from levyholder.kernels import Kernel

import oracles
from conftest import golden_pair

DALANG_GOLDEN = [p for p in oracles.GOLDEN if oracles.golden_dalang(*p)]
HALF_INDEX_NOTE = ("log_squared with the harmonic measure has ind_H = 1/2, not 1: in u = log|xi| "
                   "the weighted integrand behaves like u^(2a-2), which diverges for every a >= 1/2")


def report(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n{label}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def log_squared_pair():
    psi, mu = ex.log_squared(), sp.harmonic()
    t0 = time.perf_counter()
    h = ix.fractal_index(psi, mu, "H")
    l = ix.fractal_index(psi, mu, "L")
    return h, l, time.perf_counter() - t0


def test_criterion_1_golden_indices(capsys):
    worst, slowest, fails = 0.0, 0.0, []
    for a, b in oracles.GOLDEN:
        t0 = time.perf_counter()
        psi, mu = ex.isotropic_stable(a), sp.riesz_like(b)
        pair = ix.SpectralPair(psi, mu)
        h = ix.fractal_index(psi, mu, "H", check_dalang=False, pair=pair).value
        l = ix.fractal_index(psi, mu, "L", check_dalang=False, pair=pair).value
        slowest = max(slowest, time.perf_counter() - t0)
        err = max(abs(h - oracles.golden_ind_h(a, b)), abs(l - oracles.golden_ind_l(a, b)))
        worst = max(worst, err)
        if err > 0.02:
            fails.append((a, b, h, l))
    ok = not fails and slowest < 60
    report(capsys, "criterion 1", ok, f"9 pairs, max |error| {worst:.4f}, slowest pair {slowest:.1f}s {fails}")


def test_criterion_2a_constructed_example_ind_l(capsys, log_squared_pair):
    h, l, secs = log_squared_pair
    ok = l.lower <= 0.0 <= l.upper and l.upper <= 0.05 and secs < 120
    report(capsys, "criterion 2a", ok, f"ind_L bracket [{l.lower:.4f}, {l.upper:.4f}], {secs:.1f}s")


@pytest.mark.xfail(strict=True, reason=HALF_INDEX_NOTE)
def test_criterion_2b_constructed_example_ind_h(capsys, log_squared_pair):
    h, l, secs = log_squared_pair
    ok = h.lower >= 0.95 and secs < 120
    report(capsys, "criterion 2b", ok, f"ind_H bracket [{h.lower:.4f}, {h.upper:.4f}] (expected lower >= 0.95)")


def test_criterion_3_heat_identities(capsys):
    worst = {"I_R": 0.0, "I_H": 0.0, "I_H_bar": 0.0}
    for a, b in DALANG_GOLDEN:
        psi, mu, pair = golden_pair(a, b)
        h, l = oracles.golden_ind_h(a, b), oracles.golden_ind_l(a, b)
        k = Kernel("heat", psi)
        for T in (0.5, 1.0, 2.0):
            r = ix.kernel_space_index(k, mu, T, pair=pair).value
            t = ix.kernel_time_indices(k, mu, T, pair=pair)
            worst["I_R"] = max(worst["I_R"], abs(r - min(1.0, 2 * l)))
            worst["I_H"] = max(worst["I_H"], abs(t["I_H"].value - h))
            worst["I_H_bar"] = max(worst["I_H_bar"], abs(t["I_H_bar"].value - h))
    ok = all(v <= 0.03 for v in worst.values())
    detail = ", ".join(f"max |{k} - target| {v:.4f}" for k, v in worst.items())
    report(capsys, "criterion 3", ok, f"{len(DALANG_GOLDEN)} pairs x 3 horizons, {detail}")


def test_criterion_4_wave_identities(capsys):
    lowest, worst = 1.0, 0.0
    for a, b in DALANG_GOLDEN:
        psi, mu, pair = golden_pair(a, b)
        t = ix.kernel_time_indices(Kernel("wave", psi), mu, 1.0, pair=pair)
        lowest = min(lowest, t["I_H"].lower)
        worst = max(worst, abs(t["I_H_bar"].value - min(1.0, 2 * oracles.golden_ind_h(a, b))))
    ok = lowest >= 0.95 and worst <= 0.05
    report(capsys, "criterion 4", ok, f"min I_H lower {lowest:.4f}, max |bar I_H - min(1, 2 ind_H)| {worst:.4f}")


def test_criterion_5_simulation_exactness(capsys):
    t_start = time.perf_counter()
    psi, mu = ex.isotropic_stable(1.0), sp.riesz_like(0.5)
    lat = fs.build_lattice(mu, psi, n_modes=256)
    times, xs = np.linspace(0.125, 1.0, 8), np.linspace(0.0, 1.75, 8)
    pts = [(t, x) for t in times for x in xs]
    R = 10_000
    fractions = {}
    for kind in ("heat", "wave"):
        k = Kernel(kind, psi)
        V = fs.simulate_linear(k, lat, times, xs, replicas=R, seed=2024).values.reshape(R, -1)
        C = fs.oracle_matrix(k, mu, pts)
        prod = V[:, :, None] * V[:, None, :]
        emp = prod.mean(axis=0)
        se = prod.std(axis=0) / math.sqrt(R)
        fractions[kind] = float(np.mean(np.abs(emp - C) <= 4 * se))
    secs = time.perf_counter() - t_start
    ok = min(fractions.values()) >= 0.95 and secs < 300
    report(capsys, "criterion 5", ok,
           f"pairs within 4 s.e.: heat {fractions['heat']:.4f}, wave {fractions['wave']:.4f}; {secs:.0f}s")


def test_criterion_6_exponent_recovery(capsys):
    worst, rows = 0.0, []
    for a, b in DALANG_GOLDEN:
        psi, mu, _ = golden_pair(a, b)
        src = rg.exact(Kernel("heat", psi), mu)
        h, l = oracles.golden_ind_h(a, b), oracles.golden_ind_l(a, b)
        for direction, index, want in (("time", h, h / 2), ("space", l, l)):
            if not 0.1 < index < 0.9:
                continue
            fit = rg.fit_exponent(rg.variogram(src, direction, rg.dyadic_lags()))
            worst = max(worst, abs(fit.exponent - want))
            rows.append((a, b, direction, round(float(fit.exponent), 3), round(want, 3)))
    # empirical against exact on one golden model, same lags and base time
    psi, mu = ex.isotropic_stable(1.5), sp.riesz_like(0.5)
    k = Kernel("heat", psi)
    lat = fs.build_lattice(mu, psi, n_modes=256)
    dx, steps = 1 / 512, np.arange(17)
    s = fs.simulate_linear(k, lat, 0.5 + steps * dx, steps * dx, replicas=4000, seed=6)
    agree = []
    for direction in ("time", "space"):
        lags = steps[1:] * dx
        fe = rg.fit_exponent(rg.variogram(s, direction, lags, base_grid=[0.5]))
        fx = rg.fit_exponent(rg.variogram(rg.exact(k, mu), direction, lags, base_grid=[0.5]))
        agree.append(fe.ci[0] <= fx.exponent <= fe.ci[1])
        rows.append(("empirical", direction, round(float(fe.exponent), 3), tuple(round(float(c), 3) for c in fe.ci),
                     "exact", round(float(fx.exponent), 3)))
    ok = worst <= 0.05 and all(agree)
    report(capsys, "criterion 6", ok, f"max |exponent - prediction| {worst:.4f}; {rows}")


@pytest.fixture(scope="module")
def log_squared_heat():
    return rg.exact(Kernel("heat", ex.log_squared()), sp.harmonic())


def test_criterion_7a_not_holder_in_space(capsys, log_squared_heat):
    fit = rg.fit_exponent(rg.variogram(log_squared_heat, "space", rg.dyadic_lags()))
    ok = fit.ci[0] <= 0.0 <= fit.ci[1]
    report(capsys, "criterion 7a", ok, f"space exponent {fit.exponent:.4f}, CI [{fit.ci[0]:.4f}, {fit.ci[1]:.4f}]")


@pytest.mark.xfail(strict=True, reason=HALF_INDEX_NOTE + "; the time exponent is ind_H/2 = 1/4")
def test_criterion_7b_holder_in_time(capsys, log_squared_heat):
    fit = rg.fit_exponent(rg.variogram(log_squared_heat, "time", rg.dyadic_lags()))
    ok = fit.exponent >= 0.4
    report(capsys, "criterion 7b", ok, f"time exponent {fit.exponent:.4f} (expected >= 0.4)")


def test_criterion_8_nonlinear_reduction(capsys):
    psi, mu = ex.brownian(), sp.riesz_like(0.5)
    lat = fs.build_lattice(mu, psi, n_modes=64)
    n = 64
    xs = 2 * np.pi * np.arange(n) / n
    tg = np.linspace(0, 1, 65)
    shift = 0.0
    for seed in (0, 1, 7):
        u = fs.solve_nonlinear_heat(psi, mu, fs.constant(0.7), 0.0, lat, tg, xs, seed=seed, replicas=3)
        h = fs.simulate_linear(Kernel("heat", psi), lat, tg, xs, replicas=3, seed=seed)
        shift = max(shift, float(np.abs(u.values - h.values - 0.7 * tg[None, :, None]).max()))
    # g(u) = -u without noise: u = exp(-t (1 + psi(3))) cos(3x)
    errs = []
    for steps in (64, 128, 256):
        tg = np.linspace(0, 1, steps + 1)
        u = fs.solve_nonlinear_heat(psi, mu, fs.linear(-1.0), np.cos(3 * xs), lat.scaled(0.0), tg, xs)
        exact = np.exp(-tg[:, None] * (1 + 4.5)) * np.cos(3 * xs)[None, :]
        errs.append(float(np.abs(u.values[0] - exact).max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = shift <= 1e-10 and np.all(np.abs(orders - 1) <= 0.1)
    report(capsys, "criterion 8", ok, f"max |u - H - a0 t| {shift:.2e}; errors {errs}, orders {orders.round(3).tolist()}")


def test_criterion_9_appendix_properties(capsys):
    a_grid = (0.1, 1.0, 10.0, 100.0)
    bc_grid = [(b, c) for b in (1.0, 1.5, 2.0) for c in (0.5, 1.0, 1.5) if c < b]
    r1 = [sp.truncated_power_integral(a, b, c) / min(a**b, a**c) for a in a_grid for b, c in bc_grid]
    ok1 = all(0.25 <= r <= 4.0 for r in r1)
    r2 = [(a, sp.damped_power_integral(a, b) / (1 + b) ** (a - 1))
          for a in np.arange(1, 10) / 10 for b in (0.0, 1.0, 10.0, 1000.0)]
    ok2 = all(0.5 <= r <= 1 / (1 - a) + 1e-9 for a, r in r2)
    k = np.arange(41)
    got = [ix.index_from_integrability(np.exp(-k), np.exp(-b * k) * (1 + k**2)).value for b in (0.3, 0.7, 1.5)]
    ok3 = all(abs(g - b) <= 0.05 for g, b in zip(got, (0.3, 0.7, 1.5)))
    detail = (f"truncated power ratios [{min(r1):.3f}, {max(r1):.3f}]; damped power ratios "
              f"[{min(r for _, r in r2):.3f}, {max(r for _, r in r2):.3f}]; recovered {np.round(got, 4).tolist()}")
    report(capsys, "criterion 9", ok1 and ok2 and ok3, detail)
