import math

import numpy as np
import pytest

from conftest import random_symmetric
from ojak.errors import ConfigError, InvalidDelta, InvalidShape
from ojak.linalg import gram_schmidt_qr, spectral_norm, subspace_distance
from ojak.oja import (
    C3,
    CSV_HEADER,
    DEFAULT_GAMMA,
    ConstantProfile,
    OjaState,
    StepSchedule,
    compute_schedule,
    default_record_grid,
    format_csv_row,
    gaussian_init,
    oja_step,
    rho_bar,
    run,
    warm_start_frame,
)
from ojak.rng import make_generator
from ojak.streams import make_finite_support, make_spiked_support, model_from_mean


def two_phase_schedule():
    return StepSchedule(t0=10, phase1_eta=0.05, alpha=8.0, beta=100.0, rho_k=0.5)


def decay_schedule(beta=50.0, rho=0.5):
    return StepSchedule(t0=0, phase1_eta=0.0, alpha=8.0, beta=beta, rho_k=rho)


def spiked(d=8, k=2, noise=0.3, seed=0):
    vals = np.concatenate([[1.0, 0.9], np.linspace(0.5, 0.0, d - 2)])
    return make_spiked_support(vals, k=k, noise_scale=noise, n_pairs=2, seed=seed)


# ---------------------------------------------------------------- schedule


def test_schedule_piecewise_values():
    s = two_phase_schedule()
    assert s.eta(1) == 0.05
    assert s.eta(10) == 0.05
    assert s.eta(11) == pytest.approx(8.0 / (101.0 * 0.5))
    assert s.phase(10) == 1
    assert s.phase(11) == 2


def test_schedule_no_continuity_at_boundary():
    # the first decaying step comes from beta alone, not from phase1_eta
    s = StepSchedule(t0=5, phase1_eta=0.123, alpha=8.0, beta=40.0, rho_k=1.0)
    assert s.eta(6) == pytest.approx(8.0 / 41.0)


def test_schedule_eta_array_matches_scalar():
    s = two_phase_schedule()
    arr = s.eta_array(25)
    assert arr.shape == (25,)
    for t in range(1, 26):
        assert arr[t - 1] == pytest.approx(s.eta(t), rel=1e-15)


def test_schedule_cumulative():
    s = decay_schedule()
    cs = s.cumulative_eta(30)
    assert cs[0] == pytest.approx(s.eta(1))
    assert cs[-1] == pytest.approx(sum(s.eta(t) for t in range(1, 31)))


def test_schedule_decreasing_after_t0():
    s = two_phase_schedule()
    etas = [s.eta(t) for t in range(11, 60)]
    assert all(b < a for a, b in zip(etas, etas[1:]))


def test_schedule_rejects_bad_params():
    with pytest.raises(ConfigError):
        StepSchedule(t0=-1, phase1_eta=0.1, alpha=8.0, beta=1.0, rho_k=0.5)
    with pytest.raises(ConfigError):
        StepSchedule(t0=3, phase1_eta=0.0, alpha=8.0, beta=1.0, rho_k=0.5)
    with pytest.raises(ConfigError):
        StepSchedule(t0=0, phase1_eta=0.0, alpha=8.0, beta=0.0, rho_k=0.5)


# ---------------------------------------------------------------- profiles


def test_theoretical_profile_constants():
    p = ConstantProfile.theoretical()
    assert p.C_gamma == pytest.approx(144.0 * math.e)
    assert p.C_eta == pytest.approx(8 + 4 * math.log(2 * 144 * math.e), rel=1e-12)
    assert p.C_eta == pytest.approx(34.652, abs=5e-3)
    assert 1e29 < p.C_T < 1e31
    assert p.alpha == 8.0


def test_practical_profile_defaults():
    p = ConstantProfile.practical()
    assert p.kind == "practical"
    assert p.C_eta == 2.0
    assert p.c_beta == 20.0
    assert p.t0_cap == 100_000


def test_profile_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        ConstantProfile(kind="heroic", C_eta=1, C_T=1, C_gamma=1, c_beta=1)


# ---------------------------------------------------------------- schedule synthesis


def test_rho_bar_balanced_model():
    model = model_from_mean(np.diag([1.0, 0.0, 0.0]), 1, noise_bound=1.0)
    assert rho_bar(model) == pytest.approx(1.0)


def test_rho_bar_noise_dominated():
    model = model_from_mean(np.diag([1.0, 0.6, 0.0]), 1, noise_bound=2.0)
    assert rho_bar(model) == pytest.approx(0.4 / 2.0)


def test_practical_schedule_formulas():
    dist = spiked(d=8, k=2, noise=0.4)
    model = dist.model
    sched = compute_schedule(model, d=8, delta=0.1, profile=ConstantProfile.practical())
    rho = model.rho_k
    Mb = model.noise_bound_M
    expect_t0 = math.ceil(50 * 2 * Mb * Mb * math.log(8) / (0.01 * rho * rho))
    assert sched.t0 == min(expect_t0, 100_000)
    assert sched.alpha == 8.0
    assert sched.beta == pytest.approx(20 * (Mb / rho) ** 2 * math.log(4 / 0.1))
    assert sched.phase1_eta > 0


def test_practical_schedule_zero_noise_skips_burn_in():
    dist = spiked(d=6, k=1, noise=0.0)
    sched = compute_schedule(dist.model, d=6, delta=0.2, profile=ConstantProfile.practical())
    assert sched.t0 == 0
    assert sched.beta == 1.0  # floor engages when the noise bound is zero


def test_theoretical_schedule_shape():
    model = model_from_mean(np.diag([1.0, 0.5, 0.2, 0.0]), 1, noise_bound=1.0)
    sched = compute_schedule(model, d=4, delta=0.1, profile=ConstantProfile.theoretical())
    assert sched.t0 > 1e25  # astronomically conservative by design
    assert sched.phase1_eta > 0
    assert sched.alpha == 8.0
    rb = rho_bar(model)
    assert sched.beta >= 4 * (1 + DEFAULT_GAMMA) * 8.0 / rb
    q = C3 * 8.0 / rb
    assert sched.beta >= 2 * q * q * math.log(q * 2 * 1 / 0.1) - 1e-6


def test_doubling_delta_quarters_t0():
    model = model_from_mean(np.diag([1.0, 0.5, 0.2, 0.0]), 1, noise_bound=1.0)
    t0_small = compute_schedule(model, 4, 0.05, ConstantProfile.theoretical()).t0
    t0_large = compute_schedule(model, 4, 0.1, ConstantProfile.theoretical()).t0
    assert 2.5 < t0_small / t0_large < 6.0


def test_schedule_rejects_bad_delta():
    model = model_from_mean(np.diag([1.0, 0.0]), 1, noise_bound=0.5)
    with pytest.raises(InvalidDelta):
        compute_schedule(model, 2, 1.5, ConstantProfile.practical())


# ---------------------------------------------------------------- init


def test_gaussian_init_reproducible():
    assert np.array_equal(gaussian_init(6, 2, seed=9), gaussian_init(6, 2, seed=9))


def test_gaussian_init_scalar_case():
    Z = gaussian_init(1, 1, seed=3)
    assert Z.shape == (1, 1)


def test_gaussian_init_mean_near_zero():
    Z = gaussian_init(1000, 100, seed=5)
    assert abs(Z.mean()) < 3.0 / math.sqrt(Z.size)


def test_gaussian_init_rejects_bad_shape():
    with pytest.raises(InvalidShape):
        gaussian_init(2, 3, seed=0)


def test_warm_start_exact_norm():
    dist = spiked(d=10, k=2)
    Z0 = warm_start_frame(dist.model, 0.7, make_generator(4))
    model = dist.model
    S = model.U.T @ Z0 @ np.linalg.inv(model.V.T @ Z0)
    assert spectral_norm(S) == pytest.approx(0.7, abs=1e-12)


# ---------------------------------------------------------------- single step


def test_step_zero_matrix_keeps_span():
    state = OjaState(Z=gram_schmidt_qr(np.array([[1.0], [2.0]])))
    out = oja_step(state, np.zeros((2, 2)), eta=0.5)
    assert np.allclose(out.Z @ out.Z.T, state.Z @ state.Z.T, atol=1e-12)
    assert out.t == 1


def test_step_hand_worked():
    state = OjaState(Z=np.array([[1.0], [1.0]]) / math.sqrt(2.0))
    out = oja_step(state, np.diag([1.0, 0.0]), eta=1.0)
    expect = np.array([[2.0], [1.0]]) / math.sqrt(5.0)
    assert np.allclose(np.abs(out.Z), expect, atol=1e-12)


def test_step_power_iteration_ratio():
    A = np.diag([5.0, 1.0, 0.0])
    eta = 0.1
    state = OjaState(Z=gram_schmidt_qr(np.array([[1.0], [1.0], [0.5]])))
    dists = []
    V = np.eye(3)[:, :1]
    for _ in range(40):
        state = oja_step(state, A, eta)
        dists.append(subspace_distance(state.Z, V))
    # the second-largest direction dominates the error asymptotically
    ratio = (1 + eta) / (1 + 5 * eta)
    for a, b in zip(dists[30:], dists[31:]):
        assert b / a == pytest.approx(ratio, rel=1e-3)


def test_step_rejects_nonpositive_eta():
    state = OjaState(Z=np.eye(2)[:, :1])
    with pytest.raises(InvalidShape):
        oja_step(state, np.eye(2), eta=0.0)


# ---------------------------------------------------------------- full runs


def test_run_deterministic_stream_converges():
    A = np.diag([5.0, 1.0])
    dist = make_finite_support([A], [1.0], k=1)
    sched = StepSchedule(t0=0, phase1_eta=0.0, alpha=8.0, beta=10.0, rho_k=4.0)
    Q, trace = run(dist, sched, T=200, Z0=np.array([[1.0], [1.0]]), seed=1)
    assert subspace_distance(Q, np.eye(2)[:, :1]) < 1e-8
    assert trace.subspace_dist[-1] < 1e-8


def test_run_same_seed_identical():
    dist = spiked()
    sched = decay_schedule(rho=dist.model.rho_k)
    _, tr1 = run(dist, sched, T=60, warm_start_w=0.5, seed=7)
    _, tr2 = run(dist, sched, T=60, warm_start_w=0.5, seed=7)
    assert np.array_equal(tr1.subspace_dist, tr2.subspace_dist)
    assert np.array_equal(tr1.w_norm, tr2.w_norm)
    assert np.array_equal(tr1.good_event, tr2.good_event)


def test_run_deferred_qr_same_projector():
    dist = spiked(d=12, k=3)
    # moderate steps so the raw 40-step product stays numerically full rank
    sched = decay_schedule(beta=400.0, rho=1.0)
    Z0 = gaussian_init(12, 3, seed=21)
    Q1, _ = run(dist, sched, T=40, Z0=Z0, seed=2)
    Q2, _ = run(dist, sched, T=40, Z0=Z0, seed=2, orthonormalize_every=40)
    assert np.linalg.norm(Q1 @ Q1.T - Q2 @ Q2.T) < 1e-8


def test_run_deferred_qr_long_aggressive_product_collapses():
    # with large steps the unorthonormalized product loses rank in floats;
    # this is exactly why the default policy orthonormalizes every step
    from ojak.errors import RankDeficient

    dist = spiked(d=12, k=3)
    sched = decay_schedule(rho=dist.model.rho_k)  # rho ~ 0.045, eta(1) ~ 3.4
    Z0 = gaussian_init(12, 3, seed=21)
    with pytest.raises(RankDeficient) as err:
        run(dist, sched, T=40, Z0=Z0, seed=2, orthonormalize_every=40)
    assert "step " in str(err.value)


def test_run_scale_invariance():
    dist = spiked(d=9, k=2)
    sched = decay_schedule(rho=dist.model.rho_k)
    Z0 = gaussian_init(9, 2, seed=13)
    Q1, _ = run(dist, sched, T=30, Z0=Z0, seed=3)
    Q2, _ = run(dist, sched, T=30, Z0=3.7 * Z0, seed=3)
    assert np.linalg.norm(Q1 @ Q1.T - Q2 @ Q2.T) < 1e-10


def test_run_distance_below_w_norm():
    dist = spiked(d=10, k=2, noise=0.4)
    sched = decay_schedule(rho=dist.model.rho_k)
    _, trace = run(dist, sched, T=80, warm_start_w=0.9, seed=5)
    finite = np.isfinite(trace.w_norm)
    assert np.all(trace.subspace_dist[finite] <= trace.w_norm[finite] + 1e-8)


def test_run_w_equality_between_z_and_q():
    # the error coordinate does not care whether the iterate was orthonormalized
    dist = spiked(d=10, k=2, noise=0.3)
    sched = decay_schedule(rho=dist.model.rho_k)
    model = dist.model
    rng = make_generator(31)
    Z = gaussian_init(10, 2, seed=31)
    state = OjaState(Z=Z.copy())
    for t in range(1, 21):
        A = dist.sample(rng)
        state = oja_step(state, A, sched.eta(t), orthonormalize=False)
    Zr = state.Z
    Qr = gram_schmidt_qr(Zr)
    w_z = spectral_norm(model.U.T @ Zr @ np.linalg.inv(model.V.T @ Zr))
    w_q = spectral_norm(model.U.T @ Qr @ np.linalg.inv(model.V.T @ Qr))
    assert w_z == pytest.approx(w_q, abs=1e-8)


def test_run_warm_start_initial_row():
    dist = spiked(d=8, k=2)
    sched = decay_schedule(rho=dist.model.rho_k)
    _, trace = run(dist, sched, T=10, warm_start_w=0.6, seed=11)
    assert trace.ts[0] == 0
    assert trace.eta[0] == 0.0
    assert trace.w_norm[0] == pytest.approx(0.6, abs=1e-12)
    assert trace.good_event[0]


def test_run_good_event_monotone():
    dist = spiked(d=8, k=2, noise=0.5)
    sched = decay_schedule(beta=20.0, rho=dist.model.rho_k)
    _, trace = run(dist, sched, T=120, seed=19)  # cold start, flags may die
    g = trace.good_event.astype(int)
    assert np.all(np.diff(g) <= 0)


def test_run_cold_start_above_one_kills_flag():
    dist = spiked(d=10, k=2)
    sched = decay_schedule(rho=dist.model.rho_k)
    _, trace = run(dist, sched, T=5, warm_start_w=2.0, seed=23)
    assert not trace.good_event[0]
    assert not trace.survived


def test_run_record_subset():
    dist = spiked(d=8, k=2)
    sched = decay_schedule(rho=dist.model.rho_k)
    _, trace = run(dist, sched, T=50, seed=3, record=[0, 10, 50])
    assert list(trace.ts) == [0, 10, 50]
    assert trace.w_sigma.shape == (3, 2)


def test_run_trace_hook():
    dist = spiked(d=8, k=2)
    sched = decay_schedule(rho=dist.model.rho_k)

    def hook(t, eta_t, Z):
        return "frob", float(np.linalg.norm(Z))

    _, trace = run(dist, sched, T=5, seed=3, record=[0, 5], trace_hooks=[hook])
    assert trace.extras["frob"].shape == (2,)


def test_run_phase_column():
    dist = spiked(d=8, k=2, noise=0.2)
    sched = StepSchedule(t0=6, phase1_eta=0.05, alpha=8.0, beta=50.0,
                         rho_k=dist.model.rho_k)
    _, trace = run(dist, sched, T=12, warm_start_w=0.5, seed=2)
    assert list(trace.phase[:7]) == [1] * 7  # t = 0 reports the upcoming phase
    assert list(trace.phase[7:]) == [2] * 6


# ---------------------------------------------------------------- serialization helpers


def test_csv_header_and_row_format():
    assert CSV_HEADER == "trial,t,eta,subspace_dist,w_norm,good_event,phase"
    row = format_csv_row(3, 17, 0.125, 0.5, 1.0 / 3.0, True, 2)
    assert row == "3,17,0.125,0.5,0.33333333333333331,1,2"


def test_record_grid_small_is_full():
    assert np.array_equal(default_record_grid(100), np.arange(101))


def test_record_grid_large_is_geometric():
    grid = default_record_grid(20_000)
    assert grid[0] == 0 and grid[-1] == 20_000
    assert len(grid) < 300
    assert np.all(np.diff(grid) > 0)
    mids = grid[(grid > 100) & (grid < 20_000)]
    ratios = mids[1:] / mids[:-1]
    assert ratios.max() < 1.06


def test_trace_csv_rows(tmp_path):
    dist = spiked(d=8, k=2)
    sched = decay_schedule(rho=dist.model.rho_k)
    _, trace = run(dist, sched, T=3, seed=3, record=[0, 3], trial=7)
    rows = list(trace.csv_rows())
    assert len(rows) == 2
    assert rows[0].startswith("7,0,0,")
    assert rows[1].split(",")[1] == "3"
