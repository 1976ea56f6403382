from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import crandn
from subthz_ce.channel import channel_matrices, draw_realization
from subthz_ce.codebook import build_dictionaries
from subthz_ce.estimators import (GenieEstimator, GSOMPEstimator, MFistaEstimator,
                                  SearchCounter, TwoStageEstimator, delay_phasors, fista,
                                  group_prox, mixed_norm, mmv_ls, mmv_somp, sequential_search,
                                  track_protocol)
from subthz_ce.estimators.fista import (KroneckerLS, StackedLS, default_lambda, group_weights,
                                        next_momentum, weighted_group_norm)
from subthz_ce.estimators.greedy import residuals, top_magnitude
from subthz_ce.estimators.result import EstimateResult, support_angles
from subthz_ce.estimators.refine import fit_gains, per_pilot_ls, refine
from subthz_ce.training import TrainingConfig, observe, random_beams


def identity_dicts(cfg, n_pilots=2, squint=False):
    """Dictionaries with identity beams: orthonormal at critical first-level sampling."""
    w = [np.eye(cfg.N_r, dtype=complex)] * n_pilots
    x = [np.eye(cfg.N_t, dtype=complex)] * n_pilots
    pilots = TrainingConfig(n_pilots=n_pilots).pilots(cfg)
    return build_dictionaries(cfg, cfg.grid, w, x, pilots, squint=squint)


def random_dicts(cfg, tcfg, seed):
    ws, xs = random_beams(cfg, tcfg, np.random.default_rng(seed))
    return build_dictionaries(cfg, cfg.grid, ws, xs, tcfg.pilots(cfg))


def relative_error(a, b):
    return np.linalg.norm(np.asarray(a) - b) / np.linalg.norm(b)


# ---- prior-aided LS and SOMP ----

def test_mmv_ls_picks_true_prior_columns(small_cfg, small_tcfg, rng):
    d = random_dicts(small_cfg, small_tcfg, 1)
    true = [5, 200]
    coef = crandn(rng, d.n_pilots, 2)
    y = [d.columns(true, k) @ coef[k] for k in range(d.n_pilots)]
    chosen, z = mmv_ls(y, d, prior=[17, 200, 5, 90], n_select=2)
    assert sorted(chosen) == true
    order = np.argsort(chosen)
    np.testing.assert_allclose(z[:, order], coef, atol=1e-10)


def test_mmv_ls_empty_prior(small_cfg, small_tcfg):
    d = random_dicts(small_cfg, small_tcfg, 1)
    y = [np.ones(d.n_meas, dtype=complex)] * d.n_pilots
    chosen, z = mmv_ls(y, d, prior=[], n_select=3)
    assert chosen.size == 0 and z.shape == (d.n_pilots, 0)


def test_somp_orthonormal_single_atom(small_cfg):
    d = identity_dicts(replace(small_cfg, grid=replace(small_cfg.grid, levels=1)))
    theta = d.theta1(0)
    np.testing.assert_allclose(theta.conj().T @ theta, np.eye(theta.shape[1]), atol=1e-12)
    y = [5 * d.theta1(k)[:, 7] for k in range(d.n_pilots)]
    chosen, coef, hist = mmv_somp(y, d, tol=1e-12, max_iter=4, hierarchical=False)
    assert chosen[0] == 7
    np.testing.assert_allclose(coef[:, 0], 5, atol=1e-12)
    assert hist[0] < 1e-20


def test_somp_two_paths_on_grid(small_cfg):
    d = identity_dicts(small_cfg)
    true = [3 * small_cfg.grid.size(2) // 7, 1234]
    y = [d.columns(true, k) @ np.array([2.0, 1.0 - 0.5j]) for k in range(d.n_pilots)]
    chosen, coef, hist = mmv_somp(y, d, tol=1e-10, max_iter=4)
    assert sorted(chosen[:2]) == sorted(true)
    assert hist[1] < 1e-20


def test_somp_zero_input_stops_after_one_pick(small_cfg, small_tcfg):
    d = random_dicts(small_cfg, small_tcfg, 2)
    y = [np.zeros(d.n_meas, dtype=complex)] * d.n_pilots
    chosen, coef, hist = mmv_somp(y, d, tol=0.0, max_iter=5)
    assert len(chosen) == 1 and np.all(coef == 0) and hist == [0.0]


def test_somp_residual_orthogonal_to_selection(small_cfg, small_tcfg, rng):
    d = random_dicts(small_cfg, small_tcfg, 3)
    y = [crandn(rng, d.n_meas) for _ in range(d.n_pilots)]
    chosen, coef, _ = mmv_somp(y, d, tol=0.0, max_iter=3)
    for k, r in enumerate(residuals(y, d, chosen, coef)):
        assert np.abs(d.columns(chosen, k).conj().T @ r).max() < 1e-8


def test_top_magnitude_ties_to_lower_index():
    coef = np.array([[1.0, 3.0, 1.0, 2.0]])
    np.testing.assert_array_equal(top_magnitude([9, 4, 2, 7], coef, 2), [4, 7])
    np.testing.assert_array_equal(top_magnitude([9, 4, 2, 7], np.ones((1, 4)), 2), [2, 4])


# ---- hierarchical search ----

def test_sequential_search_exact_and_counted(small_cfg):
    d = identity_dicts(small_cfg)
    grid = small_cfg.grid
    rng = np.random.default_rng(0)
    for j in rng.choice(grid.size(), 10, replace=False):
        y = [d.columns([j], k)[:, 0] for k in range(d.n_pilots)]
        counter = SearchCounter()
        found, start = sequential_search(y, d, counter=counter)
        assert found == j
        assert counter.n == grid.sequential_count() < grid.exhaustive_count()


def test_sequential_search_single_level_is_argmax(small_cfg, small_tcfg, rng):
    cfg = replace(small_cfg, grid=replace(small_cfg.grid, levels=1))
    d = random_dicts(cfg, small_tcfg, 4)
    y = [crandn(rng, d.n_meas) for _ in range(d.n_pilots)]
    counter = SearchCounter()
    found, start = sequential_search(y, d, counter=counter)
    assert found == start == int(np.argmax(d.correlate1(y)))
    assert counter.n == cfg.grid.size(1)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(1e-6, 1e6), phase=st.floats(0, 2 * np.pi))
def test_selection_invariant_to_scaling(scale, phase):
    from conftest import small_cfg as make_cfg
    cfg = make_cfg.__wrapped__()
    d = random_dicts(cfg, TrainingConfig(n_pilots=2, n_streams=8, n_subframes=4), 5)
    rng = np.random.default_rng(6)
    y = [crandn(rng, d.n_meas) for _ in range(d.n_pilots)]
    ys = [scale * np.exp(1j * phase) * v for v in y]
    assert sequential_search(y, d) == sequential_search(ys, d)
    prior = [4, 77, 300, 1023, 2048]
    np.testing.assert_array_equal(mmv_ls(y, d, prior, 3)[0], mmv_ls(ys, d, prior, 3)[0])
    np.testing.assert_array_equal(mmv_somp(y, d, 0.0, 3)[0], mmv_somp(ys, d, 0.0, 3)[0])


# ---- group-sparse machinery ----

def test_mixed_norm_examples():
    assert mixed_norm([3, 0, 4, 0], 2, 2) == pytest.approx(5.0)
    assert mixed_norm([3, 4, 0, 0], 2, 2) == pytest.approx(7.0)
    assert mixed_norm(np.zeros(6), 3, 2) == 0.0
    with pytest.raises(ValueError):
        mixed_norm([1, 2, 3], 2, 2)


def test_group_prox_examples():
    v = np.array([[3.0], [4.0]])
    np.testing.assert_allclose(group_prox(v, np.array([1.0])), [[2.4], [3.2]])
    np.testing.assert_allclose(group_prox(v, np.array([5.0])), 0)
    np.testing.assert_allclose(group_prox(v, np.array([np.inf])), 0)
    np.testing.assert_allclose(group_prox(v, np.array([0.0])), v)
    np.testing.assert_allclose(group_prox(np.zeros((2, 1)), np.array([1.0])), 0)


def test_group_prox_matches_brute_force_2d():
    v, t = np.array([1.3, -0.4]), 0.6
    g = np.linspace(-2, 2, 2001)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    obj = 0.5 * ((xx - v[0]) ** 2 + (yy - v[1]) ** 2) + t * np.hypot(xx, yy)
    i = np.unravel_index(np.argmin(obj), obj.shape)
    got = group_prox(v[:, None], np.array([t]))[:, 0]
    np.testing.assert_allclose(got, [g[i[0]], g[i[1]]], atol=1e-3)


@settings(max_examples=25, deadline=None)
@given(v=st.lists(st.floats(-3, 3), min_size=3, max_size=3), t=st.floats(0, 4))
def test_group_prox_matches_numeric_minimizer_3d(v, t):
    v = np.array(v)
    fun = lambda x: 0.5 * np.sum((x - v) ** 2) + t * np.linalg.norm(x)
    best = minimize(fun, v * 0.5, method="Nelder-Mead",
                    options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 20000}).x
    got = group_prox(v[:, None], np.array([t]))[:, 0]
    assert fun(got) <= fun(best) + 1e-9
    np.testing.assert_allclose(got, best, atol=1e-4)


def test_momentum_sequence():
    t = [1.0]
    for _ in range(2):
        t.append(next_momentum(t[-1]))
    np.testing.assert_allclose(t, [1.0, 1.61803, 2.19353], atol=1e-5)


def test_group_weights():
    w = group_weights(6, [1, 4], lam=2.0, n_paths=4, n_common=1)
    np.testing.assert_allclose(w, [2 / np.sqrt(3), 2, 2 / np.sqrt(3), 2 / np.sqrt(3), 2, 2 / np.sqrt(3)])
    w = group_weights(3, [0], lam=1.0, n_paths=2, n_common=2)
    assert w[0] == pytest.approx(1 / np.sqrt(2)) and np.isinf(w[1:]).all()
    x = np.zeros((2, 3))
    x[:, 0] = 1.0
    assert weighted_group_norm(x, w) == pytest.approx(1.0)


def kron_problem(cfg, tcfg, seed):
    d = random_dicts(cfg, tcfg, seed)
    rng = np.random.default_rng(seed)
    y = [crandn(rng, d.n_meas) for _ in range(d.n_pilots)]
    return d, y, KroneckerLS(d._c1, d._d1, y)


def test_kronecker_problem_matches_explicit(small_cfg, small_tcfg, rng):
    d, y, kp = kron_problem(small_cfg, small_tcfg, 7)
    sp = StackedLS([d.theta1(k) for k in range(d.n_pilots)], y)
    x = crandn(rng, d.n_pilots, kp.n_groups)
    np.testing.assert_allclose(kp.forward(x), sp.forward(x), atol=1e-12)
    np.testing.assert_allclose(kp.gradient(x), sp.gradient(x), atol=1e-12)
    assert kp.lipschitz() >= sp.lipschitz() * (1 - 1e-12)


def test_gradient_matches_finite_differences(small_cfg, small_tcfg, rng):
    d, y, kp = kron_problem(small_cfg, small_tcfg, 8)
    x = crandn(rng, d.n_pilots, kp.n_groups)
    g = kp.gradient(x)
    for _ in range(5):
        dirn = crandn(rng, *x.shape)
        eps = 1e-6
        fd = (kp.value(x + eps * dirn) - kp.value(x - eps * dirn)) / (2 * eps)
        assert abs(fd - np.real(np.vdot(g, dirn))) < 1e-5 * max(1.0, abs(fd))


def test_fista_decreases_and_reaches_fixed_point(small_cfg, small_tcfg):
    d, y, kp = kron_problem(small_cfg, small_tcfg, 9)
    w = np.full(kp.n_groups, 0.3)
    x, it, trace = fista(kp, w, tol=0.0, max_iter=6000)
    assert trace[-1] <= trace[0]
    eta = kp.lipschitz()
    step = group_prox(x - kp.gradient(x) / eta, w / eta)
    assert np.linalg.norm(step - x) < 1e-8
    again, _, _ = fista(kp, w, tol=0.0, max_iter=1, x0=x)
    assert np.linalg.norm(again - x) < 1e-8
    # zero groups satisfy the subgradient bound, active ones the stationarity equation
    g = kp.gradient(x)
    zero = np.linalg.norm(x, axis=0) == 0
    assert zero.any() and np.all(np.linalg.norm(g[:, zero], axis=0) <= w[zero] + 1e-8)
    act = ~zero
    np.testing.assert_allclose(-g[:, act], w[act] * x[:, act] / np.linalg.norm(x[:, act], axis=0),
                               atol=1e-8)


def test_fista_huge_penalty_gives_zero(small_cfg, small_tcfg):
    d, y, kp = kron_problem(small_cfg, small_tcfg, 10)
    x, it, trace = fista(kp, np.full(kp.n_groups, 1e12))
    assert np.all(x == 0)


def test_default_lambda_scales_with_noise(small_cfg, small_tcfg):
    d = random_dicts(small_cfg, small_tcfg, 11)
    g1 = small_cfg.grid.size(1)
    a = default_lambda(d, 1.0, g1)
    assert default_lambda(d, 4.0, g1) == pytest.approx(2 * a)
    assert default_lambda(d, 1.0, g1, scale=3.0) == pytest.approx(3 * a)
    assert default_lambda(d, 0.0, g1) == 0.0


# ---- refinement ----

def parametric_coef(cfg, pilots, alpha, z):
    pilots = np.asarray(pilots)
    scale = np.sqrt(cfg.N_r * cfg.N_t) / (1 + cfg.delta(pilots) / cfg.f_c)
    expo = pilots - (cfg.n_subcarriers + 1) / 2
    return scale[:, None] * alpha[None, :] * z[None, :] ** expo[:, None]


def test_refine_recovers_delay_and_gain_dense_comb(small_cfg):
    cfg = small_cfg
    pilots = TrainingConfig(n_pilots=cfg.n_subcarriers).pilots(cfg)
    assert np.all(np.diff(pilots) == 1)
    tau = np.array([0.7e-9, 1.9e-9, 0.0])
    z = np.exp(-2j * np.pi * tau * cfg.bandwidth / cfg.n_subcarriers)
    alpha = np.array([1 + 1j, -0.3, 2j])
    coef = parametric_coef(cfg, pilots, alpha, z)
    zh = delay_phasors(coef, pilots, cfg)
    tau_hat = -cfg.n_subcarriers / (2 * np.pi * cfg.bandwidth) * np.angle(zh)
    np.testing.assert_allclose(tau_hat, tau, atol=1e-12 * 1e-9)
    np.testing.assert_allclose(fit_gains(coef, zh, pilots, cfg), alpha, atol=1e-12)


@pytest.mark.parametrize("kp", [2, 4, 8])
def test_refine_sparse_comb_aligned_branch(small_cfg, kp):
    cfg = small_cfg
    pilots = TrainingConfig(n_pilots=kp).pilots(cfg)
    step = np.diff(pilots)[0]
    # inside the unambiguous delay range of the comb
    tau = np.array([0.2, -0.45, 0.49]) * cfg.n_subcarriers / (step * cfg.bandwidth)
    z = np.exp(-2j * np.pi * tau * cfg.bandwidth / cfg.n_subcarriers)
    alpha = np.array([1.0, 0.5j, -2.0])
    coef = parametric_coef(cfg, pilots, alpha, z)
    zh = delay_phasors(coef, pilots, cfg)
    np.testing.assert_allclose(zh ** step, z ** step, atol=1e-10)
    np.testing.assert_allclose(parametric_coef(cfg, pilots, fit_gains(coef, zh, pilots, cfg), zh),
                               coef, atol=1e-10)
    with pytest.raises(ValueError):
        delay_phasors(coef, pilots, cfg, branch="nearest")


def test_refine_reproduces_noiseless_genie_atoms(small_cfg, make):
    tcfg = TrainingConfig(n_pilots=8, n_streams=8, n_subframes=4)
    real, obs, h = make(small_cfg, tcfg, 12)
    d = build_dictionaries(small_cfg, small_cfg.grid, obs.w, obs.x, obs.pilots)
    support = real.path_support(small_cfg.grid)
    coef, alpha, z = refine(obs.vectors(), d, support, small_cfg)
    np.testing.assert_allclose(coef, per_pilot_ls(obs.vectors(), d, support))
    np.testing.assert_allclose(np.abs(z), 1)
    np.testing.assert_allclose(parametric_coef(small_cfg, obs.pilots, alpha, z), coef, atol=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_refined_reconstruction_residual_consistent(small_cfg, make, seed):
    cfg = replace(small_cfg, tau_max=0.2e-9)
    tcfg = TrainingConfig(n_pilots=4, n_streams=8, n_subframes=4)
    real, obs, h = make(cfg, tcfg, seed)
    d = build_dictionaries(cfg, cfg.grid, obs.w, obs.x, obs.pilots)
    support = real.path_support(cfg.grid)
    y = obs.vectors()
    coef, alpha, z = refine(y, d, support, cfg)
    ls_res = sum(np.linalg.norm(r) ** 2 for r in residuals(y, d, support, coef))
    hh = EstimateResult(cfg=cfg, pilots=obs.pilots, support=support,
                        angles=support_angles(support, cfg.grid),
                        coef=coef, alpha=alpha, z=z).channels()
    ref_res = sum(np.linalg.norm(yk - (w.conj().T @ hk @ x).reshape(-1, order="F")) ** 2
                  for yk, w, x, hk in zip(y, obs.w, obs.x, hh))
    assert ref_res <= ls_res + 1e-6


def test_refine_single_pilot_falls_back(small_cfg, make):
    real, obs, h = make(small_cfg, TrainingConfig(n_pilots=1, n_streams=8, n_subframes=4), 13)
    d = build_dictionaries(small_cfg, small_cfg.grid, obs.w, obs.x, obs.pilots)
    coef, alpha, z = refine(obs.vectors(), d, real.path_support(small_cfg.grid), small_cfg)
    assert alpha is None and z is None and coef.shape[0] == 1


# ---- estimator classes ----

def test_genie_noiseless_exact(small_cfg, small_tcfg, make):
    real, obs, h = make(replace(small_cfg, on_grid=False), small_tcfg, 14)
    est = GenieEstimator().fit(obs, realization=real)
    assert relative_error(est.predict(), h) ** 2 < 1e-9
    grid = GenieEstimator(angles="grid").fit(obs, realization=real)
    assert grid.support_.size == len(real.paths)
    with pytest.raises(ValueError):
        GenieEstimator().fit(obs)


def identity_frame(cfg, seed):
    """Noiseless observation through identity beams: near-orthonormal dictionaries."""
    tcfg = TrainingConfig(n_pilots=4, n_streams=cfg.N_r, n_subframes=cfg.N_t)
    beams = ([np.eye(cfg.N_r, dtype=complex)] * 4, [np.eye(cfg.N_t, dtype=complex)] * 4)
    rng = np.random.default_rng(seed)
    real = draw_realization(cfg, rng)
    return real, observe(real, beams, cfg, tcfg, 0.0, rng)


@pytest.mark.parametrize("seed", [0, 2, 3])
@pytest.mark.parametrize("cls", [TwoStageEstimator, GSOMPEstimator, MFistaEstimator])
def test_estimators_recover_noiseless_on_grid(small_cfg, cls, seed):
    cfg = replace(small_cfg, tau_max=0.2e-9)
    real, obs = identity_frame(cfg, seed)
    est = cls(n_paths=2) if cls is GSOMPEstimator else cls(n_paths=2, n_common=1)
    est.fit(obs)
    k = np.arange(1, cfg.n_subcarriers + 1)
    full = channel_matrices(real, k, cfg)
    assert est.score(full, k) > 1 - 1e-9
    assert set(real.path_support(cfg.grid)) <= set(est.support_)


@pytest.mark.parametrize("seed", range(5))
def test_two_stage_exact_with_true_prior(small_cfg, make, seed):
    cfg = replace(small_cfg, tau_max=0.2e-9)
    real, obs, h = make(cfg, TrainingConfig(n_pilots=4, n_streams=8, n_subframes=4), seed)
    est = TwoStageEstimator(n_paths=2, n_common=2).fit(obs, prior_support=real.support(cfg.grid))
    assert relative_error(est.predict(), h) ** 2 < 1e-12
    assert est.result_.diagnostics["n_prior"] == 2


def test_empty_prior_two_stage_equals_gsomp(small_cfg, small_tcfg, make):
    real, obs, h = make(replace(small_cfg, on_grid=False), small_tcfg, 16, snr_db=10)
    a = TwoStageEstimator(n_paths=2, n_common=1).fit(obs)
    b = GSOMPEstimator(n_paths=2).fit(obs)
    np.testing.assert_array_equal(a.support_, b.support_)
    np.testing.assert_allclose(a.predict(), b.predict())
    c = GSOMPEstimator(n_paths=2).fit(obs, prior_support=a.support_)
    np.testing.assert_array_equal(c.support_, b.support_)


def test_sklearn_protocol(small_cfg, small_tcfg, make):
    est = MFistaEstimator(n_paths=2, n_common=1, lam_scale=0.5)
    assert est.get_params()["lam_scale"] == 0.5
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est
    with pytest.raises(NotFittedError):
        est.predict()
    real, obs, h = make(small_cfg, small_tcfg, 17, snr_db=20)
    est.fit(obs)
    assert est.n_iter_ >= 1 and 0 <= est.residual_ <= 1
    assert est.set_params(multiplier=2).multiplier == 2


def test_invalid_prior_rejected(small_cfg, small_tcfg, make):
    real, obs, h = make(small_cfg, small_tcfg, 18)
    with pytest.raises(ValueError):
        TwoStageEstimator().fit(obs, prior_support=[small_cfg.grid.size()])
    with pytest.raises(ValueError):
        TwoStageEstimator(n_common=5, n_paths=4).fit(obs)


# ---- tracking protocol ----

def static_frames(cfg, tcfg, n, seed, snr_db=None):
    from conftest import make_frame
    real, _, _ = make_frame(cfg, tcfg, seed)
    rng = np.random.default_rng(seed + 1)
    obs = []
    for _ in range(n):
        beams = random_beams(cfg, tcfg, rng)
        nv = 0.0 if snr_db is None else 1e-3
        obs.append(observe(real, beams, cfg, tcfg, nv, rng))
    return obs


def test_protocol_static_channel_no_resets(small_cfg):
    tcfg = TrainingConfig(n_pilots=4, n_streams=16, n_subframes=4)
    obs = static_frames(small_cfg, tcfg, 50, 19)
    log = track_protocol(TwoStageEstimator(n_paths=2, n_common=2), obs, reset_threshold=1e-6)
    assert log.results[0].diagnostics["n_prior"] == 0
    assert all(r.diagnostics["n_prior"] == 2 for r in log.results[1:])
    assert log.n_resets == 0


def test_protocol_zero_threshold_resets_every_later_frame(small_cfg, small_tcfg):
    obs = static_frames(small_cfg, small_tcfg, 5, 20, snr_db=10)
    log = track_protocol(TwoStageEstimator(n_paths=2, n_common=1), obs, reset_threshold=0.0)
    assert log.resets == [False, True, True, True, True]
    assert all(r.diagnostics["n_prior"] == 0 for r in log.results)
