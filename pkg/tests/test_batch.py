"""The vectorized suite engine must agree with the sequential reference."""

import numpy as np
import pytest

from ojak._batch import SuiteResult, run_suite
from ojak.errors import InvalidShape, UnsupportedDistribution
from ojak.oja import StepSchedule, run
from ojak.rng import derive_seed, make_generator
from ojak.streams import make_bounded_noise_model, make_spiked_support


def spiked(d=8, k=2, noise=0.4, n_pairs=2):
    vals = np.concatenate([np.linspace(1.0, 0.8, k), np.linspace(0.3, 0.1, d - k)])
    return make_spiked_support(vals, k=k, noise_scale=noise, n_pairs=n_pairs, seed=99)


def decay_schedule(rho, beta=50.0):
    return StepSchedule(t0=0, phase1_eta=0.0, alpha=8.0, beta=beta, rho_k=rho)


def compare_with_sequential(dist, schedule, T, trials, seed, record, **kwargs):
    suite = run_suite(dist, schedule, T, trials=trials, seed=seed,
                      record=record, **kwargs)
    for b in range(trials):
        _, trace = run(dist, schedule, T, seed=derive_seed(seed, b),
                       record=record, **kwargs)
        assert np.array_equal(suite.ts, trace.ts)
        assert np.array_equal(suite.eta, trace.eta)
        assert np.array_equal(suite.phase, trace.phase)
        assert np.allclose(suite.w_norm[b], trace.w_norm, rtol=1e-9, atol=1e-11)
        assert np.allclose(suite.subspace_dist[b], trace.subspace_dist, atol=1e-10)
        assert np.array_equal(suite.good_event[b], trace.good_event)
        sig = np.sqrt(np.maximum(suite.w_sig_sq[b], 0.0))
        assert np.allclose(sig, trace.w_sigma, rtol=1e-8, atol=1e-10)
    return suite


def test_suite_matches_sequential_gaussian_init():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    record = np.array([0, 1, 7, 50, 200])
    compare_with_sequential(dist, sched, 200, trials=5, seed=1234, record=record)


def test_suite_matches_sequential_warm_start_with_burn_in():
    dist = spiked(d=10, k=2, noise=0.3)
    sched = StepSchedule(t0=30, phase1_eta=0.05, alpha=8.0, beta=60.0,
                         rho_k=dist.model.rho_k)
    record = np.array([0, 10, 30, 31, 80])
    compare_with_sequential(dist, sched, 80, trials=4, seed=777, record=record,
                            warm_start_w=0.8)


@pytest.mark.parametrize("k", [1, 3])
def test_suite_matches_sequential_other_widths(k):
    dist = spiked(d=7, k=k, noise=0.3, n_pairs=2)
    sched = decay_schedule(dist.model.rho_k)
    record = np.array([0, 3, 40])
    compare_with_sequential(dist, sched, 40, trials=3, seed=5, record=record)


def test_threads_do_not_change_bytes():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    record = np.array([0, 10, 60])
    one = run_suite(dist, sched, 60, trials=6, seed=42, record=record, threads=1)
    three = run_suite(dist, sched, 60, trials=6, seed=42, record=record, threads=3)
    assert np.array_equal(one.w_norm, three.w_norm)
    assert np.array_equal(one.subspace_dist, three.subspace_dist)
    assert np.array_equal(one.w_sig_sq, three.w_sig_sq)
    assert np.array_equal(one.good_event, three.good_event)


def test_first_crossing_matches_full_trace():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    T = 150
    suite = run_suite(dist, sched, T, trials=6, seed=3,
                      crossing_threshold=0.3)
    # the default record grid is every step, so the crossing can be read
    # off the stored rows directly (row r holds step r here)
    for b in range(6):
        below = np.nonzero(suite.w_norm[b][1:] <= 0.3)[0]
        want = int(below[0]) + 1 if below.size else -1
        assert suite.first_crossing[b] == want


def test_first_crossing_never_hit_is_minus_one():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    suite = run_suite(dist, sched, 10, trials=3, seed=9,
                      crossing_threshold=1e-9)
    assert np.all(suite.first_crossing == -1)


def test_atom_counts_reproduce_the_draw_stream():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    T, trials, seed = 120, 4, 2024
    suite = run_suite(dist, sched, T, trials=trials, seed=seed,
                      record=np.array([0, T]), collect_atom_counts=True)
    assert suite.atom_counts.shape == (trials, dist.n_atoms)
    assert np.all(suite.atom_counts.sum(axis=1) == T)
    d, k = dist.model.d, dist.model.k
    for b in range(trials):
        rng = make_generator(derive_seed(seed, b))
        rng.standard_normal((d, k))  # skip the init draws
        idx = np.searchsorted(dist.cum_weights, rng.random(T), side="right")
        assert np.array_equal(suite.atom_counts[b],
                              np.bincount(idx, minlength=dist.n_atoms))


def test_survived_is_last_recorded_flag():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    suite = run_suite(dist, sched, 50, trials=4, seed=11,
                      record=np.array([0, 50]))
    assert np.array_equal(suite.survived, suite.good_event[:, -1])


def test_final_step_forced_onto_record_grid():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    suite = run_suite(dist, sched, 20, trials=2, seed=1,
                      record=np.array([0, 5]))
    assert suite.ts[-1] == 20


def test_orthogonal_start_hits_the_singular_sentinel():
    dist = spiked(d=4, k=2)
    sched = decay_schedule(dist.model.rho_k)
    Z0 = np.zeros((4, 2))
    Z0[2, 0] = 1.0
    Z0[3, 1] = 1.0  # orthogonal to the top-k eigenvectors e_1, e_2
    suite = run_suite(dist, sched, 30, trials=2, seed=0, Z0=Z0,
                      record=np.array([0, 30]))
    assert np.isinf(suite.w_norm[:, 0]).all()
    assert not suite.good_event.any()


def test_rejects_non_finite_streams():
    dist = make_bounded_noise_model(
        np.array([1.0, 0.7, 0.3, 0.1]), k=2, noise_scale=0.5, noise_rank=2,
        d=4, seed=4)
    sched = decay_schedule(dist.model.rho_k)
    with pytest.raises(UnsupportedDistribution):
        run_suite(dist, sched, 5, trials=2, seed=0)


def test_rejects_empty_or_out_of_range_grids():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    with pytest.raises(InvalidShape):
        run_suite(dist, sched, 10, trials=1, seed=0, record=np.array([], dtype=int))
    with pytest.raises(InvalidShape):
        run_suite(dist, sched, 10, trials=1, seed=0, record=np.array([0, 11]))


def test_trace_adapter_produces_csv_rows():
    dist = spiked()
    sched = decay_schedule(dist.model.rho_k)
    suite = run_suite(dist, sched, 25, trials=3, seed=8,
                      record=np.array([0, 10, 25]))
    trace = suite.trace(2)
    rows = list(trace.csv_rows())
    assert len(rows) == 3
    assert all(r.startswith("2,") for r in rows)
