"""Tests for the estimators, their statistics and the request validation."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tomolab.dataset import QuadratureDataset
from tomolab.gaussian import (analytic_fock_element, analytic_moment, analytic_q, coherent,
                              simulate_dataset, squeeze, three_mode_demo_state, vacuum)
from tomolab.geometry import MOMENT, QUASIDISTRIBUTION, build_grid
from tomolab.kernels import BoundViolation
from tomolab.reconstruct import (EstimateTable, ExactStatistics, PointAccumulator, accumulate,
                                 estimate_moments, estimate_quasidist, estimate_rho,
                                 fock_indices, mandel_q, moment_indices, sampling_point_counts,
                                 validate_request)

E1 = ((1, 0, 0), (1, 0, 0))
E2 = ((2, 0, 0), (2, 0, 0))


def within(value, err, target, k=5.0):
    return abs(value - target) <= k * err


# ---------------------------------------------------------------- accumulator

class TestPointAccumulator:
    def _data(self, seed=0, n=3000, P=7, K=3):
        rng = np.random.default_rng(seed)
        gi = rng.integers(0, P, n)
        vals = rng.normal(size=(n, K)) + gi[:, None]
        return gi, vals

    def test_matches_numpy(self):
        gi, vals = self._data()
        acc = PointAccumulator(7, 3, covariance=True).add(gi, vals)
        for p in range(7):
            sel = vals[gi == p]
            assert acc.count[p] == len(sel)
            assert np.allclose(acc.mean[p], sel.mean(axis=0), atol=1e-12)
            assert np.allclose(acc.variance()[p], np.cov(sel.T), atol=1e-12)

    def test_diagonal_mode(self):
        gi, vals = self._data(1)
        full = PointAccumulator(7, 3, covariance=True).add(gi, vals)
        diag = PointAccumulator(7, 3).add(gi, vals)
        assert np.allclose(np.diagonal(full.variance(), axis1=1, axis2=2), diag.variance(),
                           atol=1e-12)

    @given(st.integers(1, 8), st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_partition_and_order_independent(self, parts, seed):
        gi, vals = self._data(seed, n=500)
        whole = PointAccumulator(7, 3, covariance=True).add(gi, vals)
        perm = np.random.default_rng(seed + 1).permutation(len(gi))
        gi, vals = gi[perm], vals[perm]
        merged = PointAccumulator(7, 3, covariance=True)
        for idx in np.array_split(np.arange(len(gi)), parts):
            merged = merged.merge(PointAccumulator(7, 3, covariance=True).add(gi[idx],
                                                                              vals[idx]))
        assert np.array_equal(merged.count, whole.count)
        assert np.allclose(merged.mean, whole.mean, atol=1e-12)
        assert np.allclose(merged.m2, whole.m2, rtol=1e-12, atol=1e-9)

    def test_single_record_has_zero_variance(self):
        acc = PointAccumulator(2, 1).add([1], [[4.0]])
        assert acc.count.tolist() == [0, 1]
        assert acc.mean[1, 0] == 4.0
        assert np.all(acc.variance() == 0)

    def test_merge_shape_mismatch(self):
        with pytest.raises(ValueError):
            PointAccumulator(2, 1).merge(PointAccumulator(3, 1))

    def test_thread_count_does_not_change_estimate(self):
        g = build_grid(1, 1, 8, QUASIDISTRIBUTION)
        d = simulate_dataset(vacuum(1), g, 4000, 1.0, seed=5)
        one = estimate_quasidist(d, -1.0, [[0.0], [0.5]], chunk=1000, threads=1)
        four = estimate_quasidist(d, -1.0, [[0.0], [0.5]], chunk=1000, threads=4)
        assert np.allclose(one.values, four.values, rtol=1e-12, atol=0)
        assert np.allclose(one.errors, four.errors, rtol=1e-10, atol=0)

    def test_accumulate_empty(self):
        g = build_grid(1, 1, 4, QUASIDISTRIBUTION)
        empty = QuadratureDataset(g, 1.0, np.zeros(0, int), np.zeros(0))
        with pytest.raises(ValueError):
            accumulate(empty, lambda gi, x: x[:, None], 1)


# ---------------------------------------------------------------- index helpers

class TestIndices:
    def test_counts(self):
        # the ten-point moment grids of a three-mode experiment at M = 2
        assert sampling_point_counts(2, 3) == (243, 21)
        assert sampling_point_counts(1, 1) == (2, 2)

    def test_moment_indices(self):
        idx = moment_indices(1, 2)
        assert idx == [((0,), (0,)), ((0,), (1,)), ((1,), (0,)),
                       ((0,), (2,)), ((1,), (1,)), ((2,), (0,))]
        assert len([k for k in moment_indices(3, 2) if sum(k[0]) + sum(k[1]) == 2]) == 21
        assert all(m == n for m, n in moment_indices(2, 4, diagonal_only=True))

    def test_fock_indices(self):
        idx = fock_indices(2, 1)
        assert len(idx) == 16
        assert idx[0] == ((0, 0), (0, 0))


# ---------------------------------------------------------------- validation

class TestValidation:
    def _moment_source(self, n=10):
        return ExactStatistics(vacuum(3), build_grid(3, n, n, MOMENT), 0.8)

    def test_second_order_passes(self):
        rep = validate_request(self._moment_source(), kind="moments", max_order=2)
        assert rep.ok and (rep.R, rep.P) == (243, 21)

    def test_tenth_order_fails(self):
        rep = validate_request(self._moment_source(), kind="moments",
                               indices=[((10, 0, 0), (0, 0, 0))])
        assert not rep.ok
        names = {c["inequality"] for c in rep.failures}
        assert "m_j < N_psi and n_j < N_psi" in names
        assert "M_j < N_theta" in names
        with pytest.raises(BoundViolation, match="N_psi"):
            rep.raise_if_failed()

    def test_angle_bound_alone(self):
        src = ExactStatistics(vacuum(2), build_grid(2, 3, 10, MOMENT), 1.0)
        rep = validate_request(src, kind="moments", indices=[((2, 0), (2, 0))])
        assert [c["inequality"] for c in rep.failures] == ["M_j < N_theta"]

    def test_ordering_bound(self):
        g = build_grid(1, 1, 4, QUASIDISTRIBUTION)
        assert validate_request(ExactStatistics(vacuum(1), g, 0.8), s=-1.0,
                                kind="quasidist").ok
        rep = validate_request(ExactStatistics(vacuum(1), g, 0.8), s=-0.2, kind="quasidist")
        assert rep.failures[0]["inequality"] == "s < s_eta = -(1-eta)/eta"
        # the boundary itself is rejected (exactly representable at eta = 1/2)
        assert not validate_request(ExactStatistics(vacuum(1), g, 0.5), s=-1.0,
                                    kind="quasidist").ok

    def test_efficiency_bound(self):
        g = build_grid(1, 1, 4, QUASIDISTRIBUTION)
        rep = validate_request(ExactStatistics(vacuum(1), g, 0.5), kind="rho", cutoff=1)
        assert rep.failures[0]["inequality"] == "eta must exceed 1/2"
        with pytest.raises(BoundViolation, match="eta must exceed 1/2"):
            estimate_rho(ExactStatistics(vacuum(1), g, 0.4), 1)

    def test_wrong_grid_kind(self):
        src = ExactStatistics(vacuum(1), build_grid(1, 1, 4, MOMENT), 1.0)
        assert not validate_request(src, s=-1.0, kind="quasidist").ok
        with pytest.raises(ValueError):
            validate_request(src, kind="nonsense")

    def test_phase_randomized_needs_diagonal(self):
        src = ExactStatistics(vacuum(1), build_grid(1, 1, 4, MOMENT), 1.0,
                              phase_randomized=True)
        rep = validate_request(src, kind="moments", indices=[((0,), (2,))])
        assert rep.failures[0]["inequality"] == "m == n for phase-randomized data"


# ---------------------------------------------------------------- exact route

class TestExactRoute:
    """Exact expectations isolate grid error from statistical error."""

    def test_vacuum_q_converges(self):
        # the theta rule is midpoint, so the grid error falls as N_theta**-2
        errs = []
        for n in (8, 16, 32):
            src = ExactStatistics(vacuum(2), build_grid(2, n, 8, QUASIDISTRIBUTION, "midpoint"),
                                  1.0)
            t = estimate_quasidist(src, -1.0, [[0, 0]])
            assert t.error((0, 0)) == 0.0
            errs.append(abs(t.value((0, 0)).real * math.pi ** 2 - 1))
        assert errs[-1] < 5e-4
        for a, b in zip(errs, errs[1:]):
            assert a / b == pytest.approx(4.0, rel=0.05)

    def test_coherent_q_off_origin(self):
        st_ = coherent([0.7 - 0.2j])
        src = ExactStatistics(st_, build_grid(1, 1, 24, QUASIDISTRIBUTION), 1.0)
        for a in (0.0, 0.7 - 0.2j, 1.0 + 0.5j):
            got = estimate_quasidist(src, -1.0, [[a]]).value((a,)).real
            assert got == pytest.approx(analytic_q(st_, [a]), abs=1e-6)

    def test_rho_squeezed(self):
        st_ = squeeze(vacuum(1), 0, 0.5)
        src = ExactStatistics(st_, build_grid(1, 1, 40, QUASIDISTRIBUTION), 0.9)
        t = estimate_rho(src, 2)
        for key in [((0,), (0,)), ((2,), (0,)), ((1,), (1,)), ((2,), (2,))]:
            assert abs(t.value(key) - analytic_fock_element(st_, *key)) < 1e-6

    def test_rho_two_mode_converges(self):
        st_ = coherent([0.4, 0.3j])
        errs = []
        for n in (8, 16, 32):
            src = ExactStatistics(st_, build_grid(2, n, 8, QUASIDISTRIBUTION, "midpoint"), 1.0)
            t = estimate_rho(src, 1)
            errs.append(max(abs(t.value(k) - analytic_fock_element(st_, *k)) for k in t.keys))
        assert errs[-1] < 5e-4
        for a, b in zip(errs, errs[1:]):
            assert a / b == pytest.approx(4.0, rel=0.05)

    def test_moments_demo(self):
        st_ = three_mode_demo_state(1.0)
        src = ExactStatistics(st_, build_grid(3, 10, 10, MOMENT), 0.8)
        t = estimate_moments(src, max_order=2)
        for m, n in t.keys:
            assert abs(t.value((m, n)) - analytic_moment(st_, m, n, 1.0)) < 1e-9

    @pytest.mark.parametrize("s", [0.0, -1.0])
    def test_moments_other_orderings(self, s):
        st_ = squeeze(coherent([0.5 + 0.2j]), 0, 0.3)
        src = ExactStatistics(st_, build_grid(1, 1, 6, MOMENT), 0.85)
        t = estimate_moments(src, s=s, max_order=3)
        for m, n in t.keys:
            assert abs(t.value((m, n)) - analytic_moment(st_, m, n, s)) < 1e-9

    def test_post_scaling_equals_kernel_replacement(self):
        # for s = 1 the eta**(-M/2) rescaling and the (X/sqrt(eta), 1/eta)
        # replacement agree identically
        st_ = three_mode_demo_state(0.6)
        g = build_grid(3, 5, 5, MOMENT)
        d = simulate_dataset(st_, g, 20, 0.7, seed=2)
        a = estimate_moments(d, s=1.0, max_order=2)
        b = estimate_moments(d, s=1.0 - 1e-300, max_order=2)
        assert np.allclose(a.values, b.values, rtol=1e-10, atol=1e-12)


# ---------------------------------------------------------------- sampled ground truths

class TestSampled:
    def test_vacuum_rho_hermitian(self):
        g = build_grid(2, 4, 4, QUASIDISTRIBUTION)
        d = simulate_dataset(vacuum(2), g, 30, 0.9, seed=3)
        t = estimate_rho(d, 1)
        for m, n in t.keys:
            assert t.value((m, n)) == np.conj(t.value((n, m)))
            assert t.error((m, n)) == t.error((n, m))
            if m == n:
                assert t.value((m, n)).imag == 0.0
        assert within(t.value(((0, 0), (0, 0))).real, t.error(((0, 0), (0, 0))), 1.0)

    def test_coherent_photon_number(self):
        g = build_grid(1, 1, 4, MOMENT)
        d = simulate_dataset(coherent([1.0]), g, 25000, 0.8, seed=4)
        t = estimate_moments(d, max_order=2)
        v, e = t[((1,), (1,))]
        assert within(v.real, e, 1.0)
        v, e = t[((0,), (2,))]
        assert within(abs(v - 1.0), e, 0.0)

    def test_vacuum_normal_moments_zero(self):
        g = build_grid(2, 3, 3, MOMENT)
        d = simulate_dataset(vacuum(2), g, 2000, 1.0, seed=9)
        t = estimate_moments(d, max_order=2)
        for k in t.keys:
            if k == ((0, 0), (0, 0)):
                assert t.value(k) == pytest.approx(1.0)
                continue
            assert abs(t.value(k)) <= 5 * t.error(k) * math.sqrt(2)

    def test_phase_randomized_photon_statistics(self):
        g = build_grid(1, 1, 4, MOMENT)
        d = simulate_dataset(coherent([1.2]), g, 20000, 1.0, seed=6, randomize_phases=True)
        t = estimate_moments(d, max_order=4)
        assert all(m == n for m, n in t.keys)
        assert within(t.value(((1,), (1,))).real, t.error(((1,), (1,))), 1.44)
        assert within(t.value(((2,), (2,))).real, t.error(((2,), (2,))), 1.44 ** 2)
        with pytest.raises(BoundViolation):
            estimate_moments(d, indices=[((0,), (1,))])

    def test_missing_points_rejected(self):
        g = build_grid(1, 1, 4, MOMENT)
        d = QuadratureDataset(g, 1.0, np.zeros(5, int), np.zeros(5))
        with pytest.raises(ValueError, match="no records"):
            estimate_moments(d, max_order=1)


# ---------------------------------------------------------------- Mandel Q

class TestMandel:
    def _table(self, n1, n2, s1=0.0, s2=0.0, cov=0.0):
        keys = [((0,), (0,)), ((1,), (1,)), ((2,), (2,))]
        return EstimateTable("moments", keys, [1.0, n1, n2], [0.0, s1, s2],
                             {"s": 1.0, "N": 1}, {(keys[1], keys[2]): cov})

    def test_demo_values(self):
        q, _ = mandel_q(self._table(0.460366, 0.789266, 1e-3, 1e-3), 0)
        assert q == pytest.approx(1.254, abs=1e-3)

    def test_oracle_from_state(self):
        st_ = three_mode_demo_state(1.0)
        n1 = analytic_moment(st_, E1[0], E1[1]).real
        n2 = analytic_moment(st_, E2[0], E2[1]).real
        # Wick: <:n^2:> = 2 <n>^2 + |<a^2>|^2, so Q = <n> + |<a^2>|^2 / <n>
        a2 = math.sinh(1.0) * math.cosh(1.0) / 3
        assert (n2 - n1 ** 2) / n1 == pytest.approx(n1 + a2 ** 2 / n1, rel=1e-12)
        assert (n2 - n1 ** 2) / n1 == pytest.approx(1.2541, abs=1e-4)

    def test_error_propagation(self):
        n1, n2, s1, s2, c = 0.5, 0.8, 0.01, 0.02, 1e-4
        _, err = mandel_q(self._table(n1, n2, s1, s2, c), 0)
        d1, d2 = -n2 / n1 ** 2 - 1, 1 / n1
        ref = math.sqrt(d1 ** 2 * s1 ** 2 + d2 ** 2 * s2 ** 2 + 2 * d1 * d2 * c)
        assert err == pytest.approx(ref, rel=1e-12)

    def test_coherent_is_poissonian(self):
        q, _ = mandel_q(self._table(2.0, 4.0), 0)
        assert q == pytest.approx(0.0, abs=1e-15)

    def test_vacuum_undefined(self):
        with pytest.raises(ValueError, match="consistent with zero"):
            mandel_q(self._table(0.001, 0.0, 0.01, 0.01), 0)
        with pytest.raises(ValueError):
            mandel_q(self._table(0.0, 0.0), 0)

    def test_needs_normal_order(self):
        t = self._table(1.0, 1.0)
        t.metadata["s"] = 0.0
        with pytest.raises(ValueError):
            mandel_q(t, 0)
