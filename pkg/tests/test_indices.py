import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levyholder import exponent as ex
from levyholder import indices as ix
from levyholder import spectral as sp
from levyholder.errors import ConfigError, PreconditionError
from levyholder.kernels import Kernel
from levyholder.spectral import Convergent, Divergent

import oracles
from conftest import golden_indices, golden_pair

# bisection budget 8 on (0.01, 0.99) leaves a bracket of width ~0.004
TOL = 0.02


# --- weighted spectral integrals ---

def test_stable_with_riesz_weight_psi_pow_converges():
    psi, mu, pair = golden_pair(1.5, 0.5)
    v = ix.weighted_spectral_integral(psi, mu, ix.abs_psi_pow(0.5), pair=pair)
    assert isinstance(v, Convergent)


def test_log_squared_harmonic_norm_weight_diverges():
    v = ix.weighted_spectral_integral(ex.log_squared(), sp.harmonic(), ix.norm_pow(0.2))
    assert isinstance(v, Divergent)


@pytest.mark.parametrize("alpha,beta", oracles.GOLDEN)
def test_weighted_verdict_follows_tail_exponent(alpha, beta):
    psi, mu, pair = golden_pair(alpha, beta)
    for a in (0.1, 0.6, 0.9):
        p = oracles.weighted_tail_exponent(alpha, beta, a=a)
        if abs(p + 1) < 0.1:
            continue
        v = ix.weighted_spectral_integral(psi, mu, ix.abs_psi_pow(a), pair=pair)
        assert v.converges == (p < -1)


def test_weight_validation():
    with pytest.raises(ConfigError):
        ix.abs_psi_pow(1.5)
    with pytest.raises(ConfigError):
        ix.norm_pow(-0.1)
    with pytest.raises(ConfigError):
        ix.Weight("cubic")


# --- Dalang and the fractal indices ---

@pytest.mark.parametrize("alpha,beta", oracles.GOLDEN)
def test_dalang_matches_tail_calculus(alpha, beta):
    psi, mu, pair = golden_pair(alpha, beta)
    assert ix.dalang(psi, mu, pair=pair).converges == oracles.golden_dalang(alpha, beta)


@pytest.mark.parametrize("alpha,beta", [p for p in oracles.GOLDEN if oracles.golden_dalang(*p)])
def test_golden_indices(alpha, beta):
    h, l = golden_indices(alpha, beta)
    assert abs(h.value - oracles.golden_ind_h(alpha, beta)) <= TOL
    assert abs(l.value - oracles.golden_ind_l(alpha, beta)) <= TOL
    assert h.lower - TOL <= oracles.golden_ind_h(alpha, beta) <= h.upper + TOL
    assert l.lower <= l.value <= l.upper


@pytest.mark.parametrize("alpha,beta", [p for p in oracles.GOLDEN if oracles.golden_dalang(*p)])
def test_ind_l_never_exceeds_ind_h(alpha, beta):
    h, l = golden_indices(alpha, beta)
    assert l.value <= h.value + TOL


@pytest.mark.parametrize("alpha,beta", [p for p in oracles.GOLDEN if not oracles.golden_dalang(*p)])
def test_dalang_failure_raises(alpha, beta):
    psi, mu, pair = golden_pair(alpha, beta)
    with pytest.raises(PreconditionError, match="Dalang"):
        ix.fractal_index(psi, mu, "H", pair=pair)
    with pytest.raises(PreconditionError):
        ix.compute_index_report(psi, mu)


@pytest.mark.parametrize("mu", [sp.finite_uniform(), sp.riesz_like(3.0)], ids=["finite", "riesz3"])
def test_brownian_indices_capped(mu):
    psi = ex.brownian()
    for kind in "HL":
        est = ix.fractal_index(psi, mu, kind)
        assert est.value == 1.0 and est.capped and "capped" in est.flags


def test_heat_space_index_capped_for_brownian_finite_measure():
    est = ix.kernel_space_index(Kernel("heat", ex.brownian()), sp.finite_uniform(), 1.0)
    assert est.value == 1.0 and est.capped


def test_bisection_is_deterministic():
    psi, mu, _ = golden_pair(1.0, 0.5)
    a = ix.fractal_index(psi, mu, "H", pair=ix.SpectralPair(psi, mu))
    b = ix.fractal_index(psi, mu, "H", pair=ix.SpectralPair(psi, mu))
    assert a.to_dict() == b.to_dict()


def test_bisect_index_on_a_known_threshold():
    class V:
        def __init__(self, c):
            self.converges, self.tail_slope, self.log_power, self.near_boundary = c, 0.0, 0.0, False
    est = ix.bisect_index(lambda x: V(x < 0.3141), budget=20)
    assert est.lower <= 0.3141 <= est.upper and est.width < 1e-5
    assert len(est.probes) == 22
    assert ix.bisect_index(lambda x: V(False)).value == 0.0
    assert ix.bisect_index(lambda x: V(True)).capped


@pytest.mark.parametrize("tau", [0.5, 0.9])
def test_fractional_power_consistency(tau):
    # subordinating Brownian motion by a tau-stable subordinator gives the 2 tau-stable exponent
    beta = 0.5
    mu = sp.riesz_like(beta)
    psi = ex.fractional_power(ex.brownian(), tau)
    alpha = 2 * tau
    h = ix.fractal_index(psi, mu, "H")
    l = ix.fractal_index(psi, mu, "L")
    assert abs(h.value - oracles.golden_ind_h(alpha, beta)) <= TOL
    assert abs(l.value - oracles.golden_ind_l(alpha, beta)) <= TOL


def test_log_squared_harmonic_is_half():
    # the sampled integrability threshold is 1/2 (see the acceptance notes)
    h = ix.fractal_index(ex.log_squared(), sp.harmonic(), "H")
    assert h.lower - TOL <= 0.5 <= h.upper + TOL


# --- kernel indices ---

@pytest.mark.parametrize("alpha,beta", [(1.0, 0.5), (1.5, 0.25), (1.5, 0.5)])
def test_heat_space_index_is_twice_ind_l(alpha, beta):
    psi, mu, pair = golden_pair(alpha, beta)
    est = ix.kernel_space_index(Kernel("heat", psi), mu, 1.0, pair=pair)
    assert abs(est.value - min(1.0, 2 * oracles.golden_ind_l(alpha, beta))) <= 2 * TOL


@pytest.mark.parametrize("alpha,beta", [(1.0, 0.5), (1.5, 0.5)])
def test_heat_time_indices_equal_ind_h(alpha, beta):
    psi, mu, pair = golden_pair(alpha, beta)
    out = ix.kernel_time_indices(Kernel("heat", psi), mu, 1.0, pair=pair)
    want = oracles.golden_ind_h(alpha, beta)
    assert abs(out["I_H"].value - want) <= TOL
    assert abs(out["I_H_bar"].value - want) <= 0.05
    assert out["I_H_under"].value <= out["I_H_bar"].value + 0.05


# --- integrability primitive ---

K = np.arange(41)
T = np.exp(-K)


@pytest.mark.parametrize("f,want", [(np.exp(-0.7 * K), 0.7), (K**2 * np.exp(-K), 1.0),
                                    (np.exp(-0.3 * K) * (1 + K**2), 0.3)])
def test_integrability_examples(f, want):
    r = ix.index_from_integrability(T, f)
    assert abs(r.value - want) < 0.01
    assert r.kind == "equality" and r.partial_sum_consistent


def test_integrability_constant_and_zero():
    assert ix.index_from_integrability(T, np.ones_like(T)).value == pytest.approx(0.0, abs=1e-9)
    assert ix.index_from_integrability(T, np.zeros_like(T)).value == math.inf


def test_integrability_nonmonotone_is_lower_bound():
    assert ix.index_from_integrability(T, np.exp(-0.5 * K), monotone=False).kind == "lower_bound"


def test_integrability_input_errors():
    with pytest.raises(ConfigError):
        ix.index_from_integrability(T[:5], np.ones(5))
    with pytest.raises(ConfigError):
        ix.index_from_integrability(T, -np.ones_like(T))
    with pytest.raises(ConfigError):
        ix.index_from_integrability(T, np.ones(3))


@given(st.floats(0.05, 3.0), st.floats(-2.0, 2.0), st.floats(0.1, 10.0))
def test_integrability_recovers_power(b, g, c):
    f = c * np.exp(-b * K[1:]) * K[1:] ** g
    r = ix.index_from_integrability(T[1:], f)
    assert abs(r.value - b) < 1e-6


# --- reports ---

def test_report_serializations():
    psi, mu, _ = golden_pair(1.5, 0.5)
    rep = ix.compute_index_report(psi, mu, kernel_kind="heat", budget=4)
    d = rep.to_dict()
    assert d["dalang"]["verdict"] == "convergent"
    assert set(d["kernel_indices"]) == {"I_R", "I_H", "I_H_bar", "I_H_under"}
    assert json.loads(rep.to_json())["ind_H"]["value"] == rep.ind_H.value
    row = rep.csv_row()
    assert tuple(row) == ix.IndexReport.CSV_FIELDS
    assert row["dalang"] == "convergent"
    assert d["provenance"]["bisection_budget"] == 4
