import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urnlab import feedback as fb
from urnlab import scaling as sc
from urnlab.errors import LimitUndefined


def poly(alpha=1.0, beta=1.0):
    return fb.Polynomial(alpha, beta)


SQRT2 = [poly(beta=0.5), poly(beta=0.5)]
SQRT3 = [poly(beta=0.5)] * 3
KSQ2 = [poly(beta=2.0), poly(beta=2.0)]
LIN3 = [poly()] * 3


# ---------------------------------------------------------------------------
# limit field
# ---------------------------------------------------------------------------

def test_limit_p_sublinear_power_weights():
    p = sc.limit_p(SQRT2, [0.25, 0.75])
    w = np.sqrt([0.25, 0.75])
    assert p == pytest.approx(w / w.sum(), abs=1e-12)


def test_limit_G_sqrt_frozen_value():
    G = sc.limit_G(SQRT2, [0.25, 0.75])
    assert G[0] == pytest.approx(0.11602540378443865, abs=1e-12)
    assert G.sum() == pytest.approx(0.0, abs=1e-14)


def test_limit_G_linear_vanishes_everywhere():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.dirichlet(np.ones(3))
        assert np.max(np.abs(sc.limit_G(LIN3, x))) < 1e-12


def test_limit_p_superlinear_amplifies_leader():
    p = sc.limit_p(KSQ2, [0.25, 0.75])
    assert p == pytest.approx([0.1, 0.9], abs=1e-12)


def test_limit_p_exponential_winner_take_all():
    v = sc.vector_field([fb.Exponential(1.0, 1.0)] * 2, None, [0.6, 0.4])
    assert v.p_lim == pytest.approx([1.0, 0.0], abs=1e-12)


def test_vector_field_exponential_tie_undefined_limit():
    with pytest.raises(LimitUndefined):
        sc.vector_field([fb.Exponential(1.0, 1.0)] * 2, None, [0.5, 0.5])
    # at finite k the field is still well defined (and zero by symmetry)
    v = sc.vector_field([fb.Exponential(1.0, 1.0)] * 2, 100.0, [0.5, 0.5])
    assert v.G_k == pytest.approx([0.0, 0.0], abs=1e-12)
    assert v.G_lim is None and v.p_lim is None


def test_vector_field_finite_k_converges_to_limit():
    # pure powers are scale-free, so use exponentials where the finite-k
    # field genuinely moves toward the winner-take-all limit
    specs = [fb.Exponential(1.0, 1.0)] * 2
    x = [0.6, 0.4]
    lim = sc.limit_G(specs, x)
    gaps = []
    for k in (40.0, 80.0, 160.0):
        v = sc.vector_field(specs, k, x)
        gaps.append(np.max(np.abs(v.G_k - lim)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-6


def test_vector_field_power_family_is_scale_free():
    x = [0.3, 0.7]
    lim = sc.limit_G(SQRT2, x)
    for k in (10.0, 1e4):
        v = sc.vector_field(SQRT2, k, x)
        assert np.max(np.abs(v.G_k - lim)) < 1e-12


def test_vector_field_validates_simplex():
    with pytest.raises(ValueError):
        sc.vector_field(SQRT2, None, [0.5, 0.6])
    with pytest.raises(ValueError):
        sc.vector_field(SQRT2, -1.0, [0.5, 0.5])


# ---------------------------------------------------------------------------
# mean-path ODE
# ---------------------------------------------------------------------------

def test_ode_linear_feedback_is_frozen():
    path = sc.integrate_mean_ode(LIN3, [0.2, 0.3, 0.5], T=10.0, h=0.01)
    assert np.max(np.abs(path.Z - path.Z[0])) < 1e-12


def test_ode_sublinear_contracts_toward_barycenter():
    path = sc.integrate_mean_ode(SQRT3, [0.1, 0.1, 0.8], T=50.0, h=0.01)
    d = np.linalg.norm(path.Z - 1.0 / 3.0, axis=1)
    n = len(d) - 1
    assert d[n] < d[n // 2] < d[0]
    assert d[n] < 0.08
    # rows stay on the simplex
    assert np.max(np.abs(path.Z.sum(axis=1) - 1.0)) < 1e-9
    assert np.min(path.Z) >= 0.0


def test_ode_time_change_identity():
    # Z(t) = Y(log(1+t)) on the whole grid
    path = sc.integrate_mean_ode(SQRT3, [0.1, 0.1, 0.8], T=50.0, h=0.01)
    assert path.Y is not None
    assert np.max(np.abs(path.Z - path.Y)) < 1e-6


def test_ode_superlinear_runs_to_vertex():
    path = sc.integrate_mean_ode(KSQ2, [0.3, 0.7], T=200.0, h=0.01)
    assert path.Z[-1][1] > 0.97
    assert np.min(path.Z) >= 0.0


def test_ode_validates_inputs():
    with pytest.raises(ValueError):
        sc.integrate_mean_ode(SQRT2, [0.5, 0.5], T=0.0, h=0.01)
    with pytest.raises(ValueError):
        sc.integrate_mean_ode(SQRT2, [0.7, 0.7], T=1.0, h=0.01)


def test_scaling_path_csv_layout(tmp_path):
    path = sc.integrate_mean_ode(SQRT2, [0.25, 0.75], T=1.0, h=0.25)
    f = tmp_path / "p.csv"
    path.to_csv(f)
    lines = f.read_text().strip().splitlines()
    assert lines[0] == "t,Z_1,Z_2,M_1,M_2,H_1,H_2,qvar_1,qvar_2"
    assert len(lines) == 1 + len(path.times)


# ---------------------------------------------------------------------------
# fixed points
# ---------------------------------------------------------------------------

def test_fixed_points_sublinear_interior_attractor():
    rep = sc.fixed_points(SQRT2)
    assert not rep.continuum_of_fixed_points
    stab = {tuple(np.round(p.point, 6)): p.stability for p in rep.points}
    assert stab[(0.5, 0.5)] == "Stable"
    assert stab[(1.0, 0.0)] == "Unstable"
    assert stab[(0.0, 1.0)] == "Unstable"
    assert all(p.residual < 1e-10 for p in rep.points)


def test_fixed_points_superlinear_vertices_attract():
    rep = sc.fixed_points(KSQ2)
    stab = {tuple(np.round(p.point, 6)): p.stability for p in rep.points}
    assert stab[(1.0, 0.0)] == "Stable"
    assert stab[(0.0, 1.0)] == "Stable"
    assert stab[(0.5, 0.5)] == "Unstable"


def test_fixed_points_linear_continuum():
    rep = sc.fixed_points([poly(), poly()])
    assert rep.continuum_of_fixed_points


def test_fixed_points_three_agents_sublinear():
    rep = sc.fixed_points(SQRT3)
    pts = [tuple(np.round(p.point, 6)) for p in rep.points]
    bary = tuple(np.round(np.full(3, 1 / 3), 6))
    assert bary in pts
    stab = dict(zip(pts, (p.stability for p in rep.points)))
    assert stab[bary] == "Stable"


# ---------------------------------------------------------------------------
# fluctuation system
# ---------------------------------------------------------------------------

def test_fclt_path_martingale_rows_sum_to_zero():
    path = sc.simulate_fclt(SQRT2, [0.25, 0.75], T=5.0, h=0.01, rng=3)
    assert np.max(np.abs(path.M.sum(axis=1))) == 0.0
    assert np.max(np.abs(path.H.sum(axis=1))) < 1e-13
    assert np.max(np.abs(path.Ztilde - path.M - path.H)) < 1e-15
    # quadratic variation accumulates monotonically
    assert np.all(np.diff(path.qvar, axis=0) >= 0.0)


def test_fclt_reproducible_for_fixed_seed():
    a = sc.simulate_fclt(SQRT2, [0.25, 0.75], T=2.0, h=0.01, rng=11)
    b = sc.simulate_fclt(SQRT2, [0.25, 0.75], T=2.0, h=0.01, rng=11)
    assert np.array_equal(a.M, b.M)
    assert np.array_equal(a.H, b.H)


def test_fclt_linear_variance_matches_quadratic_variation():
    # for linear feedback DG = 0, so Ztilde = M and var M_T = <M>(T)
    specs = [poly(), poly()]
    ens = sc.ensemble_fclt(specs, [0.3, 0.7], T=5.0, h=0.01, replicas=4000,
                           rng=7)
    assert np.max(np.abs(ens.H_T)) < 1e-9
    v = ens.M_T.var(axis=0)
    target = ens.qvar[-1]
    se = target * math.sqrt(2.0 / 3999)
    assert np.all(np.abs(v - target) < 4 * se + 1e-4)
    # exact closed form p(1-p)(1 - 1/(1+T)), up to the O(h) grid bias
    p = 0.3 * 0.7
    assert target[0] == pytest.approx(p * (1 - 1 / 6.0), rel=2e-2)


def test_fclt_ensemble_checkpoints_shape_and_law():
    ens = sc.ensemble_fclt(SQRT2, [0.25, 0.75], T=2.0, h=0.01, replicas=500,
                           rng=5, checkpoints=[0.5, 1.0])
    assert ens.checkpoints.shape == (2, 500, 2)
    assert ens.checkpoint_times == pytest.approx([0.5, 1.0])
    assert ens.Ztilde_T.shape == (500, 2)
    # fluctuations are centered
    assert np.abs(ens.Ztilde_T.mean(axis=0)).max() < 5 / math.sqrt(500)


def test_fclt_single_and_ensemble_agree_in_distribution():
    # same grid, same per-step law: compare variances at T
    specs = [poly(), poly()]
    singles = np.array([
        sc.simulate_fclt(specs, [0.5, 0.5], T=2.0, h=0.02, rng=100 + r).M[-1, 0]
        for r in range(400)])
    ens = sc.ensemble_fclt(specs, [0.5, 0.5], T=2.0, h=0.02, replicas=4000,
                           rng=8)
    v1, v2 = singles.var(), ens.M_T[:, 0].var()
    assert abs(v1 - v2) < 4 * v2 * math.sqrt(2.0 / 399)


# ---------------------------------------------------------------------------
# quadratic variation
# ---------------------------------------------------------------------------

def test_quadratic_variation_frozen_values():
    qv = sc.quadratic_variation(SQRT3, [0.8, 0.1, 0.1], T=1e4)
    assert qv.values[0] == pytest.approx(0.24623133, abs=1e-6 + qv.abs_error)
    assert qv.values[1] == pytest.approx(qv.values[2], abs=1e-9)
    assert qv.tail_bound == pytest.approx(1.0 / (4.0 * (1.0 + 1e4)), rel=1e-12)

    qv2 = sc.quadratic_variation([poly(beta=2.0)] * 3, [0.4, 0.3, 0.3], T=1e4)
    assert qv2.values[0] == pytest.approx(0.18959595, abs=1e-6 + qv2.abs_error)


def test_quadratic_variation_zero_horizon_and_monotone():
    qv0 = sc.quadratic_variation(SQRT2, [0.4, 0.6], T=0.0)
    assert qv0.values == pytest.approx([0.0, 0.0])
    vals = [sc.quadratic_variation(SQRT2, [0.4, 0.6], T=t).values[0]
            for t in (1.0, 10.0, 100.0)]
    assert vals[0] < vals[1] < vals[2]
    # bounded by the analytic cap 1/4
    assert vals[-1] < 0.25


def test_quadratic_variation_error_bound_is_tight():
    qv = sc.quadratic_variation(SQRT2, [0.3, 0.7], T=100.0)
    assert qv.abs_error < 1e-6


# ---------------------------------------------------------------------------
# short-time scaling
# ---------------------------------------------------------------------------

BETA_REGIMES = [
    (0.7, "deterministic_curve"),
    (2.0 / 3.0, "curve_plus_diffusion"),
    (0.5, "diffusion_only"),
]


@pytest.mark.parametrize("beta,regime", BETA_REGIMES)
def test_beta_scaling_regimes(beta, regime):
    rep = sc.beta_scaling(SQRT2, [0.25, 0.75], beta=beta, N=2000, T=0.5,
                          seed=1)
    assert rep.regime == regime


def test_beta_scaling_slope_and_covariance():
    rep = sc.beta_scaling(SQRT2, [0.25, 0.75], beta=0.7, N=5000, T=1.0, seed=2)
    assert rep.lln_slope == pytest.approx(sc.limit_G(SQRT2, [0.25, 0.75]),
                                          abs=1e-12)
    # tangent covariance: rows sum to zero, diagonal p(1-p)
    p = sc.limit_p(SQRT2, [0.25, 0.75])
    assert rep.covariance.sum(axis=1) == pytest.approx([0.0, 0.0], abs=1e-12)
    assert np.diag(rep.covariance) == pytest.approx(p * (1 - p), abs=1e-12)
    assert rep.lln_line([1.0])[0] == pytest.approx(rep.lln_slope)


def test_beta_scaling_empirical_tracks_lln_line():
    rep = sc.beta_scaling(SQRT2, [0.25, 0.75], beta=0.75, N=20_000, T=1.0,
                          seed=4)
    resid = rep.empirical - rep.lln_line(rep.times)
    # fluctuations about the line are N^(beta/2 - (1-beta)) = N^0.125 scaled,
    # still small against the O(1) slope at this size
    assert np.abs(resid[-1]).max() < 0.25
    assert rep.empirical[0] == pytest.approx([0.0, 0.0])


def test_beta_scaling_deterministic_in_seed():
    a = sc.beta_scaling(SQRT2, [0.25, 0.75], beta=0.6, N=3000, T=0.5, seed=9)
    b = sc.beta_scaling(SQRT2, [0.25, 0.75], beta=0.6, N=3000, T=0.5, seed=9)
    assert np.array_equal(a.empirical, b.empirical)


def test_beta_scaling_validates_exponent():
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            sc.beta_scaling(SQRT2, [0.25, 0.75], beta=bad, N=100, T=1.0)


# ---------------------------------------------------------------------------
# tangent-space conservation across operations
# ---------------------------------------------------------------------------

@given(st.integers(min_value=0, max_value=10 ** 6))
@settings(max_examples=20, deadline=None)
def test_limit_G_is_tangent_on_random_points(salt):
    rng = np.random.default_rng(salt)
    A = int(rng.integers(2, 5))
    beta = float(rng.uniform(0.2, 2.5))
    specs = [poly(float(rng.uniform(0.5, 2.0)), beta) for _ in range(A)]
    x = rng.dirichlet(np.ones(A))
    G = sc.limit_G(specs, x)
    assert abs(G.sum()) < 1e-12
