import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urnlab import asymptotics as asym
from urnlab import feedback as fb
from urnlab.errors import AssumptionViolated, RadiusExceeded, ToleranceUnreachable


def poly(alpha=1.0, beta=1.0):
    return fb.Polynomial(alpha, beta)


# frozen by independent 40-digit evaluation of the closed forms
EXACT_E_644 = 0.6759349662550935          # product form, start (6, 4, 4), e^k
EXACT_KSQ_11 = 0.2720290549821331         # pi / sinh(pi)
EXACT_KSQ_21 = 0.5440581099642663         # 2 pi / sinh(pi)
EXACT_KSQ_101 = 0.9003480614567201        # Gamma/ sinh product via zeta tails
SMON_LB_73_N10 = 0.5206250563892554       # hand-evaluated bound formula


# ---------------------------------------------------------------------------
# total-monopoly sandwich
# ---------------------------------------------------------------------------

def test_tmon_bounds_exponential_start_644():
    b = asym.tmon_bounds([fb.Exponential(1.0, 1.0)] * 3,
                         [6 / 14, 4 / 14, 4 / 14], N=14)
    assert b.lower == pytest.approx(math.exp(-2.0 / (math.e * (math.e - 1.0))),
                                    abs=1e-12)
    assert b.upper == pytest.approx(0.7139208911, abs=1e-9)
    assert b.c_N == pytest.approx(math.e ** 2 / (math.e ** 2 + 2.0), abs=1e-12)
    assert b.lower == pytest.approx(0.6516846293, abs=1e-9)
    assert b.lower <= EXACT_E_644 <= b.upper


def test_tmon_bounds_symmetric_square_start():
    b = asym.tmon_bounds([poly(beta=2.0)] * 2, [0.5, 0.5], N=2)
    # S = 1, tail sum from the leader's own count: pi^2/6; c_N = 1/2
    assert b.lower == pytest.approx(math.exp(-math.pi ** 2 / 6), abs=1e-12)
    assert b.lower == pytest.approx(0.19302528913989744, abs=1e-15)
    assert b.c_N == pytest.approx(0.5, abs=1e-12)
    assert b.upper == pytest.approx(math.sqrt(b.lower), abs=1e-12)


def test_tmon_bounds_rejects_nonexplosive_leader():
    with pytest.raises(fb.NotExplosive if hasattr(fb, "NotExplosive") else Exception):
        asym.tmon_bounds([poly(beta=0.5)] * 2, [0.5, 0.5], N=2)


def test_tmon_bounds_far_tail_scan_gives_up():
    # polynomial weights reach the 1e12 dominance threshold only beyond the
    # scan cap once the competitor mass is large
    with pytest.raises(ToleranceUnreachable):
        asym.tmon_bounds([poly(beta=2.0)] * 2, [0.5, 0.5], N=10_000)


def test_exact_tmon_matches_frozen_product():
    v, err = asym.exact_tmon_probability([fb.Exponential(1.0, 1.0)] * 3,
                                         [6, 4, 4], tol=1e-12)
    assert err <= 1e-12
    assert abs(v - EXACT_E_644) <= err + 1.5e-13


KSQ_CASES = [
    ([1, 1], EXACT_KSQ_11),
    ([2, 1], EXACT_KSQ_21),
    ([10, 1], EXACT_KSQ_101),
]


@pytest.mark.parametrize("X0,truth", KSQ_CASES)
def test_exact_tmon_square_family_closed_forms(X0, truth):
    v, err = asym.exact_tmon_probability([poly(beta=2.0)] * 2, X0, tol=1e-10)
    assert abs(v - truth) <= err + 1e-10


def test_exact_tmon_underflows_to_zero_for_huge_mass():
    # true value is exp(-1285...) which is an honest double-precision zero
    v, err = asym.exact_tmon_probability([poly(beta=2.0)] * 2, [7000, 3000],
                                         tol=1e-6)
    assert v == 0.0
    assert err >= 0.0


def test_exact_tmon_monotone_in_lead():
    specs = [poly(beta=2.0)] * 2
    vals = [asym.exact_tmon_probability(specs, [m, 1], tol=1e-10)[0]
            for m in (1, 2, 4, 10)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# attraction domains
# ---------------------------------------------------------------------------

def test_classify_domain_polynomial_strict_leader():
    d = asym.classify_domain([poly(beta=2.0)] * 3, [0.5, 0.3, 0.2])
    assert d.verdicts == ("InDomain", "EmptyDomain", "EmptyDomain")
    assert d.method == "TypeP_tailratio"
    assert d.ratios[0, 1] < 1.0 and d.ratios[0, 2] < 1.0


def test_classify_domain_exponential_tie_is_boundary():
    d = asym.classify_domain([fb.Exponential(1.0, 1.0)] * 2, [0.5, 0.5])
    assert d.verdicts == ("Boundary", "Boundary")
    assert d.method == "TypeE_ratio"


def test_classify_domain_mixed_scale_polynomials():
    specs = [poly(2.0, 2.0), poly(2.0, 2.0), poly(1.0, 2.0)]
    d = asym.classify_domain(specs, [0.3, 0.3, 0.4])
    assert d.verdicts[0] == "Boundary"
    assert d.verdicts[1] == "Boundary"
    assert d.verdicts[2] == "EmptyDomain"


def test_classify_domain_at_most_one_interior():
    rng = np.random.default_rng(7)
    for _ in range(25):
        A = int(rng.integers(2, 5))
        specs = [poly(float(rng.uniform(0.5, 3.0)), float(rng.uniform(1.5, 3.0)))
                 for _ in range(A)]
        chi0 = rng.dirichlet(np.ones(A))
        d = asym.classify_domain(specs, chi0)
        assert sum(v == "InDomain" for v in d.verdicts) <= 1


@given(st.floats(min_value=0.1, max_value=10.0),
       st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=25, deadline=None)
def test_classify_domain_type_e_prefactor_invariance(a1, a2):
    base = asym.classify_domain([fb.Exponential(1.0, 2.0),
                                 fb.Exponential(1.0, 1.0)], [0.4, 0.6])
    scaled = asym.classify_domain([fb.Exponential(a1, 2.0),
                                   fb.Exponential(a2, 1.0)], [0.4, 0.6])
    assert scaled.verdicts == base.verdicts


def test_classify_domain_sublinear_all_empty():
    d = asym.classify_domain([poly(beta=0.5)] * 2, [0.6, 0.4])
    assert all(v == "EmptyDomain" for v in d.verdicts)


# ---------------------------------------------------------------------------
# long-run share verdicts
# ---------------------------------------------------------------------------

LIMIT_SHARE_CASES = [
    ([poly(1.0, 0.5), poly(2.0, 0.5)], "Deterministic", [0.2, 0.8]),
    ([fb.Log(1.0), fb.Log(3.0)], "Deterministic", [0.25, 0.75]),
    ([poly(1.0, 1.0)] * 3, "RandomDirichlet", None),
    ([fb.LogLinear(1.0, 0.5)] * 2, "WeakMonopolyRandomWinner", None),
    ([fb.LogLinear(1.0, 2.0)] * 2, "StrongMonopoly", None),
    ([poly(1.0, 1.0), poly(2.0, 1.0)], "Unknown", None),
]


@pytest.mark.parametrize("specs,verdict,shares", LIMIT_SHARE_CASES)
def test_limit_shares_verdicts(specs, verdict, shares):
    r = asym.limit_shares(specs)
    assert r.verdict == verdict
    if shares is None:
        if verdict != "Deterministic":
            assert r.shares is None
    else:
        assert r.shares == pytest.approx(shares, abs=1e-9)


def test_limit_shares_deterministic_alpha_ratio_power():
    # alpha-weighted sublinear: chi_i proportional to alpha_i^(1/(1-beta))
    r = asym.limit_shares([poly(1.0, 0.5), poly(3.0, 0.5)])
    w = 3.0 ** (1.0 / 0.5)
    assert r.shares == pytest.approx([1 / (1 + w), w / (1 + w)], abs=1e-9)


def test_limit_shares_mixed_sublinear_numeric_squeezes_out_slower():
    r = asym.limit_shares([poly(1.0, 0.5), poly(2.0, 0.5), poly(1.0, 0.25)])
    assert r.verdict == "Deterministic"
    assert r.shares[0] == pytest.approx(0.2, abs=1e-3)
    assert r.shares[1] == pytest.approx(0.8, abs=1e-3)
    assert r.shares[2] < 1e-6


def test_grids_verdict_detects_oscillation():
    # synthetic probe values that keep disagreeing between the two grids
    js = np.arange(12)
    a = np.tile([0.7, 0.3], (len(js), 1))
    b = np.tile([0.3, 0.7], (len(js), 1))
    verdict, shares = asym._grids_verdict(a, b)
    assert verdict == "Oscillating"
    assert shares is None


def test_grids_verdict_accepts_convergence():
    js = np.arange(12)
    drift = 1e-9 * js[:, None]
    a = np.tile([0.25, 0.75], (len(js), 1)) + drift
    b = np.tile([0.25, 0.75], (len(js), 1)) - drift
    verdict, shares = asym._grids_verdict(a, b)
    assert verdict == "Deterministic"
    assert shares == pytest.approx([0.25, 0.75], abs=1e-6)


# ---------------------------------------------------------------------------
# strong-monopoly lower bound
# ---------------------------------------------------------------------------

def test_smon_lower_bound_hand_value():
    got = asym.smon_lower_bound([poly(beta=2.0)] * 2, [0.7, 0.3], N=10,
                                eps=0.01)
    assert got == pytest.approx(SMON_LB_73_N10, abs=1e-12)


def test_smon_lower_bound_close_to_one_for_large_N():
    got = asym.smon_lower_bound([poly(beta=2.0)] * 2, [0.7, 0.3], N=10_000,
                                eps=0.01)
    assert got > 1.0 - 1e-6


def test_smon_lower_bound_monotone_in_N():
    vals = [asym.smon_lower_bound([poly(beta=2.0)] * 2, [0.7, 0.3], N=n,
                                  eps=0.01) for n in (10, 100, 1000)]
    assert vals[0] < vals[1] < vals[2]


def test_smon_lower_bound_clamps_to_zero_when_vacuous():
    got = asym.smon_lower_bound([poly(beta=3.0)] * 3, [0.5, 0.3, 0.2], N=6,
                                eps=0.01)
    assert got == 0.0


def test_smon_lower_bound_requires_interior_point():
    with pytest.raises(AssumptionViolated):
        asym.smon_lower_bound([poly(beta=2.0)] * 2, [0.5, 0.5], N=10, eps=0.01)


def test_smon_lower_bound_rejects_nonexplosive_and_type_e():
    with pytest.raises(AssumptionViolated):
        asym.smon_lower_bound([poly(beta=0.5)] * 2, [0.7, 0.3], N=10, eps=0.01)
    with pytest.raises(AssumptionViolated):
        asym.smon_lower_bound([fb.Exponential(1.0, 1.0)] * 2, [0.7, 0.3],
                              N=10, eps=0.01)


def test_smon_lower_bound_eps_window_enforced():
    with pytest.raises(AssumptionViolated):
        asym.smon_lower_bound([poly(beta=2.0)] * 2, [0.7, 0.3], N=10, eps=0.9)


# ---------------------------------------------------------------------------
# explosion-fluctuation CGF
# ---------------------------------------------------------------------------

def test_cgf_radius_and_zero_value():
    rep = asym.cgf_U(fb.LogLinear(1.0, 1.0), 3, [0.0])
    assert rep.radius == pytest.approx(3.0 * math.log(4.0), rel=1e-12)
    assert rep.evaluation[0][1] == pytest.approx(0.0, abs=1e-15)


def test_cgf_second_cumulant_is_squared_tail_sum():
    spec = fb.LogLinear(1.0, 1.0)
    rep = asym.cgf_U(spec, 3, [0.1], L=4)
    direct = fb.tail_sum(spec, 3, 2, tol=1e-12)
    got = dict(rep.cumulants)[2]
    assert got == pytest.approx(direct.value, abs=1e-9)
    # higher cumulants present and positive
    assert dict(rep.cumulants)[3] > 0 and dict(rep.cumulants)[4] > 0


@pytest.mark.parametrize("lam", [0.3, -0.3])
def test_cgf_matches_direct_centered_series(lam):
    spec = fb.LogLinear(1.0, 1.0)
    x0 = 3
    rep = asym.cgf_U(spec, x0, [lam])
    # direct evaluation: sum of -log(1 - lam/F(k)) - lam/F(k)
    ks = np.arange(x0, x0 + 2_000_000, dtype=float)
    F = fb.values(spec, ks)
    direct = float(np.sum(-np.log1p(-lam / F) - lam / F))
    assert rep.evaluation[0][1] == pytest.approx(direct, abs=1e-6)


def test_cgf_rejects_lambda_outside_radius():
    spec = fb.LogLinear(1.0, 1.0)
    R = 3.0 * math.log(4.0)
    with pytest.raises(RadiusExceeded):
        asym.cgf_U(spec, 3, [1.5 * R])


@pytest.mark.parametrize("spec", [poly(beta=2.0), poly(beta=0.4)])
def test_cgf_requires_borderline_growth(spec):
    # needs a divergent reciprocal sum with a convergent squared sum
    with pytest.raises(AssumptionViolated):
        asym.cgf_U(spec, 2, [0.0])


# ---------------------------------------------------------------------------
# share floor and decreasing-feedback limit
# ---------------------------------------------------------------------------

def test_share_floor_constant_family():
    assert asym.share_floor(fb.Constant(4.0), 2.0, 100.0) == pytest.approx(
        math.exp(-2.0), abs=1e-15)


def test_share_floor_loglinear_growth():
    spec = fb.LogLinear(1.0, 1.0)
    got = asym.share_floor(spec, 1.0, 1000.0)
    assert got == pytest.approx(math.exp(-math.log(1001.0)), rel=1e-9)


def test_share_floor_rejects_explosive():
    with pytest.raises(AssumptionViolated):
        asym.share_floor(poly(beta=2.0), 1.0, 10.0)


def test_share_floor_rejects_decreasing_ratio():
    with pytest.raises(AssumptionViolated):
        asym.share_floor(poly(beta=0.5), 1.0, 10.0)


def test_exp_decreasing_limit_values():
    assert asym.exp_decreasing_limit([1.0, 3.0]) == pytest.approx((0.75, 0.25))
    assert asym.exp_decreasing_limit([2.0, 2.0]) == pytest.approx((0.5, 0.5))
    with pytest.raises(ValueError):
        asym.exp_decreasing_limit([1.0, -1.0])


# ---------------------------------------------------------------------------
# aggregated report
# ---------------------------------------------------------------------------

def test_regime_report_weak_monopoly_joint_verdict():
    rep = asym.regime_report([fb.LogLinear(1.0, 0.5)] * 2, [0.5, 0.5], N=2)
    assert rep["joint_verdict"] == "weak monopoly (random winner)"
    json.dumps(rep)                       # must be serializable as-is


def test_regime_report_strong_monopoly_has_bounds():
    rep = asym.regime_report([fb.Exponential(1.0, 1.0)] * 3,
                             [6 / 14, 4 / 14, 4 / 14], N=14)
    assert rep["joint_verdict"] == "strong monopoly"
    t = rep["bounds"]["tmon"]
    assert t["lower"] == pytest.approx(0.6516846293, abs=1e-9)
    assert t["upper"] == pytest.approx(0.7139208911, abs=1e-9)
    assert t["exact"] is not None
    assert t["lower"] - 1e-12 <= t["exact"][0] <= t["upper"] + 1e-12
    # the closed-form lower bound needs type P, so it stays empty here
    assert "smon_lower" in rep["bounds"]
    json.dumps(rep)


def test_regime_report_deterministic_and_dirichlet():
    det = asym.regime_report([poly(1.0, 0.5), poly(2.0, 0.5)], [0.5, 0.5], N=4)
    assert det["joint_verdict"] == "deterministic"
    assert det["limit_shares"]["shares"] == pytest.approx([0.2, 0.8], abs=1e-9)
    dir_ = asym.regime_report([poly(1.0, 1.0)] * 2, [0.5, 0.5], N=4)
    assert dir_["joint_verdict"] == "Dirichlet"
    assert dir_["limit_shares"]["verdict"] == "RandomDirichlet"


# ---------------------------------------------------------------------------
# sandwich property on random explosive configurations
# ---------------------------------------------------------------------------

def _random_explosive_spec(rng) -> fb.Feedback:
    kind = rng.integers(0, 3)
    if kind == 0:
        return fb.Polynomial(float(rng.uniform(0.5, 2.0)),
                             float(rng.uniform(2.5, 4.0)))
    if kind == 1:
        return fb.Exponential(float(rng.uniform(0.5, 2.0)),
                              float(rng.uniform(0.5, 2.0)))
    return fb.StretchedExp(float(rng.uniform(0.5, 2.0)),
                           float(rng.uniform(0.5, 1.5)),
                           float(rng.uniform(0.5, 0.9)))


def test_tmon_sandwich_on_random_configs():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        A = int(rng.integers(2, 4))
        specs = [_random_explosive_spec(rng) for _ in range(A)]
        X0 = rng.integers(1, 9, size=A)
        X0[0] += int(rng.integers(1, 6))          # make agent 0 the leader
        N = int(X0.sum())
        chi0 = X0 / N
        try:
            b = asym.tmon_bounds(specs, chi0, N=N)
            v, err = asym.exact_tmon_probability(specs, X0, tol=1e-8)
        except ToleranceUnreachable:
            continue
        assert b.lower <= b.upper + 1e-15
        assert b.lower - 1e-12 <= v + err
        assert v - err <= b.upper + 1e-12
        assert 0.0 <= v <= 1.0
        checked += 1
