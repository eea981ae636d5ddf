import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

import oracle
from levysir.errors import (
    ChiTwoNonPositive,
    DegenerateDiffusion,
    InvalidOrder,
    ThetaNonPositive,
    ValidationError,
)
from levysir.model import (
    LevyAtom,
    ModelParams,
    NoiseSpec,
    Regime,
    ThresholdReport,
    classify,
    deterministic_threshold,
    drift_reduced,
    extinction_report,
    find_p,
    gamma_kernel,
    moment_condition,
    persistence_report,
    threshold_report,
    validate_hypotheses,
)

TABLE_TOL = 5e-4

# Frozen from tests/oracle.py (40-digit mpmath evaluation of the closed forms).
FIG1_ORACLE = {
    "t_star": 0.38181818181818183, "upsilon": -0.03438770574120078,
    "pi_term": -0.00468982019567514, "sigma_term": 0.016825147710487445,
    "lambda_term": 0.0625, "chi2": 0.5375, "theta": -0.03693903870262968,
}
FIG2_ORACLE = {
    "sbar1": 0.028928443206045373, "sbar2": 0.05423583061567387,
    "sbar4": 0.04113982019567514, "t_tilde": 1.0344199106830148,
    "c1": 5.252351982830864, "c2": 9.041252404262528, "c3": 75.86730641866802,
    "persistence_lower_bound": 0.005778017734934788,
}


# ----------------------------------------------------------------- types

def test_params_must_be_positive():
    with pytest.raises(ValidationError):
        ModelParams(A=0.9, mu1=-0.1, mu2=0.5, gamma=0.05, beta=0.07, eta=0.09)
    with pytest.raises(ValidationError):
        ModelParams(A=0.9, mu1=0.3, mu2=0.5, gamma=0.05, beta=float("nan"), eta=0.09)


def test_noise_rejects_negative_sigma_and_weight():
    with pytest.raises(ValidationError):
        NoiseSpec(sigma1=-0.1)
    with pytest.raises(ValidationError):
        LevyAtom(weight=-1.0)


def test_total_rate_and_compensator():
    noise = NoiseSpec(atoms=(LevyAtom(0.5, 0.1, 0.2, 0.3), LevyAtom(1.5, -0.1, 0.0, 0.1)))
    assert noise.total_rate == 2.0
    assert noise.compensator() == pytest.approx((0.05 - 0.15, 0.1, 0.15 + 0.15))


# ----------------------------------------------------------------- thresholds

def test_deterministic_threshold_examples(fig1_params, fig2_params):
    assert deterministic_threshold(fig1_params) == pytest.approx(0.3818, abs=TABLE_TOL)
    # direct arithmetic 1.3*0.3/(0.3*0.55)
    assert deterministic_threshold(fig2_params) == pytest.approx(1.3 * 0.3 / (0.3 * 0.55), rel=1e-14)
    assert deterministic_threshold(fig2_params) == pytest.approx(2.3636, abs=1e-4)
    boundary = ModelParams(A=0.3, mu1=0.3, mu2=0.5, gamma=0.25, beta=0.75, eta=0.1)
    assert deterministic_threshold(boundary) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("key,table", [
    ("t_star", 0.3818), ("upsilon", -0.0344), ("pi_term", -0.0047), ("sigma_term", 0.0168),
    ("lambda_term", 0.0625), ("chi2", 0.5375), ("theta", -0.0369),
])
def test_extinction_terms_match_table(fig1_params, fig12_noise, key, table):
    terms = extinction_report(fig1_params, fig12_noise)
    assert getattr(terms, key) == pytest.approx(table, abs=TABLE_TOL)
    assert getattr(terms, key) == pytest.approx(FIG1_ORACLE[key], rel=1e-12, abs=1e-15)


def test_extinction_terms_without_jumps_or_s_noise(fig1_params):
    noise = NoiseSpec(0.0, 0.25, 0.27)
    terms = extinction_report(fig1_params, noise)
    assert terms.lambda_term == 0.0 and terms.pi_term == 0.0
    assert terms.theta == pytest.approx(terms.upsilon - terms.sigma_term, rel=1e-15)


def test_pi_with_equal_jump_sizes(fig1_params):
    noise = NoiseSpec.single_atom((0.15, 0.25, 0.27), (0.2, 0.1, 0.1))
    # mpmath: ln(1.1) - 0.1
    assert extinction_report(fig1_params, noise).pi_term == pytest.approx(-0.00468982019567514, rel=1e-12)


def test_pi_sign_cases(fig1_params):
    mixed = NoiseSpec.single_atom((0.1, 0.2, 0.2), (0.0, 0.3, -0.2))
    assert extinction_report(fig1_params, mixed).pi_term == 0.0
    negative = NoiseSpec.single_atom((0.1, 0.2, 0.2), (0.0, -0.3, -0.1), weight=2.0)
    assert extinction_report(fig1_params, negative).pi_term == pytest.approx(
        2.0 * (math.log(0.9) + 0.1), rel=1e-12)


def test_extinction_errors(fig1_params):
    with pytest.raises(DegenerateDiffusion):
        extinction_report(fig1_params, NoiseSpec(0.1, 0.0, 0.2))
    with pytest.raises(DegenerateDiffusion):
        extinction_report(fig1_params, NoiseSpec(0.1, 0.2, 0.0))
    with pytest.raises(ChiTwoNonPositive):
        extinction_report(fig1_params, NoiseSpec(0.8, 0.2, 0.2))


@pytest.mark.parametrize("key,table", [
    ("sbar1", 0.0289), ("sbar2", 0.0542), ("sbar4", 0.0411), ("t_tilde", 1.0344),
])
def test_persistence_terms_match_table(fig2_params, fig12_noise, key, table):
    terms = persistence_report(fig2_params, fig12_noise)
    assert getattr(terms, key) == pytest.approx(table, abs=TABLE_TOL)


@pytest.mark.parametrize("key", sorted(FIG2_ORACLE))
def test_persistence_terms_match_oracle(fig2_params, fig12_noise, key):
    terms = persistence_report(fig2_params, fig12_noise)
    assert getattr(terms, key) == pytest.approx(FIG2_ORACLE[key], rel=1e-12)


def test_persistence_lower_bound_hand_check(fig2_params, fig12_noise):
    terms = persistence_report(fig2_params, fig12_noise)
    assert terms.c1 == pytest.approx(5.2524, abs=1e-3)
    s_level = fig2_params.A / (fig2_params.mu1 + terms.sbar1)
    assert s_level == pytest.approx(0.91205, abs=1e-5)
    assert terms.persistence_lower_bound == pytest.approx(
        (1 / terms.c1) * s_level * (1 - 1 / terms.t_tilde), rel=1e-14)
    assert terms.persistence_lower_bound == pytest.approx(0.005778, abs=1e-6)


def test_persistence_bound_zero_below_one(fig1_params, fig12_noise):
    assert persistence_report(fig1_params, fig12_noise).persistence_lower_bound == 0.0


def test_zero_noise_collapse(fig1_params, fig2_params, quiet):
    for p in (fig1_params, fig2_params):
        pers = persistence_report(p, quiet)
        assert (pers.sbar1, pers.sbar2, pers.sbar4) == (0.0, 0.0, 0.0)
        assert pers.t_tilde == deterministic_threshold(p)
        rep = threshold_report(p, quiet)
        assert rep.chi2 == 2 * p.mu1
        assert rep.theta is None and "DegenerateDiffusion" in rep.extinction_note


# ----------------------------------------------------------------- moment condition

def test_moment_condition_fig1(fig1_params, fig12_noise):
    check = moment_condition(fig1_params, fig12_noise, 2.1)
    assert check.chi1p == pytest.approx(0.0206, abs=TABLE_TOL)
    ref_chi, ref_ell = oracle.chi1p(0.9, 0.3, 0.5, 0.05, 0.07, 0.09, (0.15, 0.25, 0.27),
                                    [(1, 0.2, 0.23, 0.1)], 2.1)
    assert check.chi1p == pytest.approx(ref_chi, rel=1e-12)
    assert check.ell_p == pytest.approx(ref_ell, rel=1e-12)
    assert check.ell_p == pytest.approx(0.0616, abs=1e-4)
    assert check.vartheta == 0.09 and check.sigma_bar == pytest.approx(0.27**2)
    assert check.chi1p == check.vartheta - (check.p - 1) / 2 * check.sigma_bar - check.ell_p / check.p


def test_moment_condition_noiseless(fig1_params, quiet):
    check = moment_condition(fig1_params, quiet, 3.0)
    assert check.chi1p == check.vartheta == 0.09


def test_moment_condition_errors(fig1_params, fig12_noise):
    with pytest.raises(InvalidOrder):
        moment_condition(fig1_params, fig12_noise, 2.0)
    bad = ModelParams(A=0.9, mu1=0.3, mu2=0.05, gamma=0.05, beta=0.07, eta=0.2)
    with pytest.raises(ThetaNonPositive):
        moment_condition(bad, fig12_noise, 2.5)


def test_find_p(fig1_params, fig12_noise, quiet):
    found = find_p(fig1_params, fig12_noise, p_max=4.0, grid_step=0.1)
    assert found is not None and found[1] > 0
    assert found[1] >= moment_condition(fig1_params, fig12_noise, 2.1).chi1p
    assert find_p(fig1_params, NoiseSpec(0.1, 10.0, 0.1), 4.0, 0.1) is None
    p, chi = find_p(fig1_params, quiet, 4.0, 0.1)
    assert p == 2.1 and chi == 0.09


# ----------------------------------------------------------------- hypotheses

def test_hypotheses_fig1_all_pass(fig1_params, fig12_noise):
    verdicts = validate_hypotheses(fig1_params, fig12_noise)
    assert [v.name for v in verdicts] == ["H1", "H2", "H3", "H4", "H5"]
    assert all(v.passed for v in verdicts)


def test_hypotheses_report_h2_failure(fig1_params):
    noise = NoiseSpec.single_atom((0.1, 0.1, 0.1), (0.2, -1.0, 0.1))
    verdicts = {v.name: v for v in validate_hypotheses(fig1_params, noise)}
    assert verdicts["H1"].passed
    assert not verdicts["H2"].passed
    assert "1+lam2" in verdicts["H2"].detail


def test_hypotheses_noiseless(fig1_params, quiet):
    verdicts = validate_hypotheses(fig1_params, quiet)
    assert all(v.passed for v in verdicts)
    assert verdicts[-1].quantity == 0.09


# ----------------------------------------------------------------- drift and kernel

def test_drift_examples(fig1_params):
    assert drift_reduced((0, 0, 0), fig1_params) == (0.9, 0.0, 0.0)
    assert drift_reduced((3.0, 0, 0), fig1_params) == pytest.approx((0, 0, 0), abs=1e-15)
    assert drift_reduced((1, 1, 1), fig1_params) == pytest.approx((0.53, -0.48, 0.0), abs=1e-15)


def test_gamma_kernel_values():
    assert gamma_kernel(0.0, 0, 0.09) == pytest.approx(0.09, rel=1e-14)
    assert gamma_kernel(2.0, 1, 0.5) == pytest.approx(2.0 * 0.25 * math.exp(-1.0))
    arr = gamma_kernel(np.array([0.0, 1.0]), 0, 0.09)
    assert arr.shape == (2,)
    with pytest.raises(ValueError):
        gamma_kernel(1.0, -1, 0.1)


@pytest.mark.parametrize("n,eta", [(0, 0.09), (1, 0.7), (3, 0.2), (10, 2.0)])
def test_gamma_kernel_normalized_with_mean(n, eta):
    mass, _ = quad(lambda s: gamma_kernel(s, n, eta), 0, np.inf)
    mean, _ = quad(lambda s: s * gamma_kernel(s, n, eta), 0, np.inf)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert mean == pytest.approx((n + 1) / eta, rel=1e-6)


def test_gamma_kernel_weak_mean():
    mean, _ = quad(lambda s: s * gamma_kernel(s, 0, 0.09), 0, np.inf)
    assert mean == pytest.approx(11.111, abs=1e-3)


# ----------------------------------------------------------------- report and regime

def test_threshold_report_regimes(fig1_params, fig2_params, fig12_noise):
    assert threshold_report(fig1_params, fig12_noise).regime is Regime.EXTINCTION
    assert threshold_report(fig2_params, fig12_noise).regime is Regime.PERSISTENCE
    mid = ModelParams(A=0.9, mu1=0.3, mu2=0.5, gamma=0.05, beta=0.3, eta=0.09)
    assert threshold_report(mid, fig12_noise).regime is Regime.INDETERMINATE
    assert classify(-0.1, 2.0) is Regime.EXTINCTION
    assert classify(None, 1.5) is Regime.PERSISTENCE
    assert classify(None, 0.5) is Regime.INDETERMINATE


def test_threshold_report_round_trip(fig2_params, fig12_noise):
    rep = threshold_report(fig2_params, fig12_noise)
    assert ThresholdReport.from_dict(rep.to_dict()) == rep


# ----------------------------------------------------------------- properties

lam_value = st.floats(min_value=-0.95, max_value=3.0, allow_nan=False)
atom_st = st.builds(LevyAtom, st.floats(min_value=0.0, max_value=5.0), lam_value, lam_value, lam_value)
sigma_st = st.floats(min_value=0.01, max_value=1.5)
noise_st = st.builds(NoiseSpec, sigma_st, sigma_st, sigma_st,
                     st.lists(atom_st, max_size=4).map(tuple))
rate_st = st.floats(min_value=0.01, max_value=3.0)
params_st = st.builds(ModelParams, rate_st, rate_st, rate_st, rate_st, rate_st, rate_st)


@settings(max_examples=300, deadline=None)
@given(params_st, noise_st)
def test_sign_invariants(params, noise):
    pers = persistence_report(params, noise)
    assert min(pers.sbar1, pers.sbar2, pers.sbar4) >= 0
    chi2 = 2 * params.mu1 - noise.sigma1**2 - sum(a.weight * a.lam1**2 for a in noise.atoms)
    if chi2 > 0:
        assert extinction_report(params, noise).pi_term <= 0


@settings(max_examples=200, deadline=None)
@given(params_st, noise_st)
def test_theta_identity(params, noise):
    try:
        t = extinction_report(params, noise)
    except ChiTwoNonPositive:
        return
    again = t.upsilon + t.pi_term - t.sigma_term + params.eta * math.sqrt(t.t_star * t.lambda_term / t.chi2)
    assert t.theta == again


@settings(max_examples=200, deadline=None)
@given(params_st, noise_st, st.floats(min_value=1.01, max_value=3.0), st.sampled_from(["sigma2", "sigma4"]))
def test_more_diffusion_lowers_theta(params, noise, factor, which):
    try:
        base = extinction_report(params, noise)
    except ChiTwoNonPositive:
        return
    import dataclasses
    louder = dataclasses.replace(noise, **{which: getattr(noise, which) * factor})
    bumped = extinction_report(params, louder)
    assert bumped.sigma_term > base.sigma_term
    assert bumped.theta < base.theta


@settings(max_examples=200, deadline=None)
@given(noise_st, st.floats(min_value=2.001, max_value=6.0))
def test_ell_p_nonnegative(noise, p):
    params = ModelParams(A=1.0, mu1=0.5, mu2=0.5, gamma=0.5, beta=0.2, eta=0.3)
    assert moment_condition(params, noise, p).ell_p >= 0
