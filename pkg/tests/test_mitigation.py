import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kzdefects.basis import enumerate_basis
from kzdefects.exceptions import InvalidGridError
from kzdefects.mitigation import (ReadoutModel, ZeroNoiseExtrapolator, ZNEGrid,
                                  amplification_channel, apply_readout_noise,
                                  confusion_inverse_mean, extrapolate_grid, mitigate,
                                  noisy_distribution, noisy_wall_moments, systematic_error,
                                  zne_mitigate)
from kzdefects.observables import (BitstringSample, QuantumState, defect_moments,
                                   sample_bitstrings)

from conftest import random_state, walls

N_BITS = 10 ** 6


def ones_sample(n_shots, L):
    return BitstringSample(np.array([(1 << L) - 1]), np.array([n_shots]), L, "open")


def zeros_sample(n_shots, L):
    return BitstringSample(np.array([0]), np.array([n_shots]), L, "open")


def within(k, n, p, nsig=5):
    return abs(k - n * p) <= nsig * np.sqrt(n * p * (1 - p))


def state_L8(seed=5):
    b = enumerate_basis(8, "periodic")
    return QuantumState(random_state(b.dim, seed), b)


def oracle_full_distribution(state, e01, e10):
    """Measured-bitstring distribution by explicit loops over true and measured strings."""
    L = state.basis.n_sites
    p_true = dict(zip(state.basis.states.tolist(), state.probabilities()))
    out = np.zeros(1 << L)
    for s, ps in p_true.items():
        for m in range(1 << L):
            w = ps
            for j in range(L):
                t, r = (s >> j) & 1, (m >> j) & 1
                w *= (1 - e10 if r else e10) if t else (e01 if r else 1 - e01)
            out[m] += w
    return out


def oracle_confusion_mean(p_meas, L, e01, e10):
    """Corrected two-site marginals via the inverse 4x4 tensor-product matrix."""
    M = np.array([[1 - e01, e10], [e01, 1 - e10]])
    M2inv = np.linalg.inv(np.kron(M, M))
    total = 0.0
    for i in range(L):
        j = (i + 1) % L
        marg = np.zeros(4)
        for m, pm in enumerate(p_meas):
            marg[2 * ((m >> i) & 1) + ((m >> j) & 1)] += pm
        corr = M2inv @ marg
        total += corr[0] + corr[3]
    return total


class TestNoise:
    def test_identity(self):
        s = sample_bitstrings(state_L8(), 1000, 1)
        assert apply_readout_noise(s, 0.0, 0.0, 3) is s

    def test_all_ones(self):
        L = 10
        noisy = apply_readout_noise(ones_sample(N_BITS // L, L), 0.0, 0.061, 7)
        ones = int(noisy.bits().sum())
        assert within(ones, N_BITS, 0.939)

    def test_expectation_map(self):
        state = state_L8(2)
        s = sample_bitstrings(state, 125000, 11)
        noisy = apply_readout_noise(s, 0.05, 0.1, 12)
        p_true = s.bits().mean(axis=0)
        got = noisy.bits().sum(axis=0)
        n = s.total_shots
        for j in range(8):
            expect = (1 - 0.1) * p_true[j] + 0.05 * (1 - p_true[j])
            assert within(got[j], n, expect)

    def test_reproducible(self):
        s = sample_bitstrings(state_L8(), 5000, 1)
        a = apply_readout_noise(s, 0.02, 0.07, (4, 1))
        b = apply_readout_noise(s, 0.02, 0.07, (4, 1))
        c = apply_readout_noise(s, 0.02, 0.07, (4, 2))
        np.testing.assert_array_equal(a.expand(), b.expand())
        assert not np.array_equal(a.bits(), c.bits())

    def test_invalid(self):
        with pytest.raises(ValueError):
            apply_readout_noise(ones_sample(10, 3), -0.1, 0.0, 0)
        with pytest.raises(ValueError):
            apply_readout_noise(ones_sample(10, 3), 0.0, 1.5, 0)

    def test_associative(self):
        L = 10
        e01, e10, q01, q10 = 0.03, 0.06, 0.02, 0.05
        M1 = np.array([[1 - e01, e10], [e01, 1 - e10]])
        M2 = np.array([[1 - q01, q10], [q01, 1 - q10]])
        comp = M2 @ M1
        for start, key, rate in ((ones_sample, 1, comp[1, 1]), (zeros_sample, 0, comp[1, 0])):
            s = start(N_BITS // L, L)
            two = apply_readout_noise(apply_readout_noise(s, e01, e10, 1), q01, q10, 2)
            one = apply_readout_noise(s, comp[1, 0], comp[0, 1], 3)
            assert within(int(two.bits().sum()), N_BITS, rate)
            assert within(int(one.bits().sum()), N_BITS, rate)


class TestChannel:
    def test_identity(self):
        ch = amplification_channel(ReadoutModel(), 1, 1)
        assert (ch.q01, ch.q10) == (0.0, 0.0) and not ch.clamped

    @pytest.mark.parametrize("beta", [1.0, 1.5, 2.0, 3.7])
    def test_eps01_zero_closed_form(self, beta):
        m = ReadoutModel(eps01=0.0, eps10=0.061)
        ch = amplification_channel(m, 1, beta)
        assert ch.q10 == pytest.approx((beta - 1) * 0.061 / (1 - 0.061), abs=1e-15)
        assert ch.q01 == pytest.approx(0.0, abs=1e-15)
        # composed 1->0 rate
        assert ch.q10 + (1 - ch.q10) * 0.061 == pytest.approx(beta * 0.061, abs=1e-15)

    @given(a=st.floats(1, 3), b=st.floats(1, 2.5), e01=st.floats(0, 0.05),
           e10=st.floats(0, 0.1))
    @settings(max_examples=60, deadline=None)
    def test_composition_exact(self, a, b, e01, e10):
        m = ReadoutModel(eps01=e01, eps10=e10)
        ch = amplification_channel(m, a, b)
        extra = np.array([[1 - ch.q01, ch.q10], [ch.q01, 1 - ch.q10]])
        target = np.array([[1 - a * e01, b * e10], [a * e01, 1 - b * e10]])
        np.testing.assert_allclose(extra @ m.confusion_matrix(), target, atol=1e-12)
        assert not ch.clamped

    def test_composed_rates_monte_carlo(self):
        L = 10
        m = ReadoutModel()
        ch = amplification_channel(m, 3, 2)
        for start, rate in ((ones_sample, 1 - 2 * m.eps10), (zeros_sample, 3 * m.eps01)):
            s = start(N_BITS // L, L)
            out = apply_readout_noise(apply_readout_noise(s, m.eps01, m.eps10, 21),
                                      ch.q01, ch.q10, 22)
            assert within(int(out.bits().sum()), N_BITS, rate)

    def test_clamped_flagged(self):
        m = ReadoutModel(eps01=0.3, eps10=0.4)
        with pytest.warns(RuntimeWarning):
            ch = amplification_channel(m, 3, 2)
        assert ch.clamped and 0 <= ch.q01 <= 1 and 0 <= ch.q10 <= 1

    def test_below_one(self):
        with pytest.raises(InvalidGridError):
            amplification_channel(ReadoutModel(), 0.5, 1)


class TestGrid:
    @pytest.mark.parametrize("kw", [dict(alphas=()), dict(alphas=(2, 3)), dict(betas=(1, 0.5)),
                                    dict(betas=(1, 1)), dict(repeats=0)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidGridError):
            ZNEGrid(**kw)

    def test_too_few_for_quadratic(self):
        s = sample_bitstrings(state_L8(), 2000, 1)
        with pytest.raises(InvalidGridError):
            zne_mitigate(s, ReadoutModel(), ZNEGrid(betas=(1, 2)), "wall_var", "quadratic")

    def test_bad_observable(self):
        s = sample_bitstrings(state_L8(), 200, 1)
        with pytest.raises(ValueError):
            zne_mitigate(s, ReadoutModel(), observable="parity")


class TestAnalyticExpectations:
    def test_noisy_distribution_matches_loops(self):
        b = enumerate_basis(6, "periodic")
        st_ = QuantumState(random_state(b.dim, 3), b)
        np.testing.assert_allclose(noisy_distribution(st_, 0.03, 0.08),
                                   oracle_full_distribution(st_, 0.03, 0.08), atol=1e-14)

    def test_noiseless_moments(self):
        s = state_L8()
        mean, var = noisy_wall_moments(s, 0.0, 0.0)
        assert (mean, var) == pytest.approx(defect_moments(s), abs=1e-12)

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_linear_zne_equals_confusion_inverse(self, seed):
        state = state_L8(seed)
        m = ReadoutModel(eps01=0.0, eps10=0.061)
        grid = ZNEGrid()
        points = {(i, j): (noisy_wall_moments(state, a * m.eps01, b * m.eps10)[0], 0.0)
                  for (i, a), (j, b) in itertools.product(enumerate(grid.alphas),
                                                          enumerate(grid.betas))}
        zne, _, _, _ = extrapolate_grid(points, m, grid, "linear")
        p_meas = noisy_distribution(state, m.eps01, m.eps10)
        inv = oracle_confusion_mean(p_meas, 8, m.eps01, m.eps10)
        assert zne == pytest.approx(inv, abs=1e-10)
        assert inv == pytest.approx(defect_moments(state)[0], abs=1e-10)

    def test_eps01_residue_is_second_order(self):
        state = state_L8(1)
        exact = defect_moments(state)[0]
        grid = ZNEGrid()
        devs = []
        for e01 in (0.004, 0.008, 0.016):
            m = ReadoutModel(eps01=e01, eps10=0.061)
            points = {(i, j): (noisy_wall_moments(state, a * e01, b * m.eps10)[0], 0.0)
                      for (i, a), (j, b) in itertools.product(enumerate(grid.alphas),
                                                              enumerate(grid.betas))}
            devs.append(abs(extrapolate_grid(points, m, grid, "linear")[0] - exact))
        # halving eps01 at least roughly quarters the residue
        assert devs[1] / devs[0] > 3.0 and devs[2] / devs[1] > 3.0
        assert devs[0] < 8 * 0.004 ** 2 * 8

    def test_confusion_inverse_on_sample_matches_oracle(self):
        s = sample_bitstrings(state_L8(), 4000, 9)
        m = ReadoutModel()
        p = np.zeros(1 << 8)
        p[s.states] = s.counts / s.total_shots
        val, err = confusion_inverse_mean(s, m)
        assert val == pytest.approx(oracle_confusion_mean(p, 8, m.eps01, m.eps10), abs=1e-10)
        assert err > 0

    def test_confusion_inverse_identity(self):
        s = sample_bitstrings(state_L8(), 4000, 9)
        m = ReadoutModel(0.0, 0.0, 0.0, 0.0)
        d = np.repeat([walls(int(x), 8) for x in s.states], s.counts)
        assert confusion_inverse_mean(s, m)[0] == pytest.approx(d.mean(), abs=1e-12)

    def test_singular(self):
        s = sample_bitstrings(state_L8(), 10, 9)
        bad = ReadoutModel.__new__(ReadoutModel)
        object.__setattr__(bad, "eps01", 0.5)
        object.__setattr__(bad, "eps10", 0.5)
        with pytest.raises(ValueError):
            confusion_inverse_mean(s, bad)

    def test_variance_neel_oracle(self):
        # eps01 = 0: each Rydberg atom lost adds two walls, D = 2 Bin(L/2, e)
        b = enumerate_basis(8, "periodic")
        amps = np.zeros(b.dim, dtype=complex)
        amps[b.index(0b01010101)] = 1
        neel = QuantumState(amps, b)
        for e in (0.0, 0.061, 0.2):
            mean, var = noisy_wall_moments(neel, 0.0, e)
            assert mean == pytest.approx(8 * e, abs=1e-12)
            assert var == pytest.approx(2 * 8 * e * (1 - e), abs=1e-12)

    @pytest.mark.parametrize("seed", [4, 5, 6])
    def test_variance_strictly_curved_in_eps10(self, seed):
        # the measured variance bends downward (binomial e(1-e) structure)
        state = state_L8(seed)
        e = np.linspace(0.0, 0.15, 7)
        v = np.array([noisy_wall_moments(state, 0.009, x)[1] for x in e])
        curv = np.diff(v, 2)
        assert np.all(curv < 0)
        assert np.min(np.abs(curv)) > 1e-3


class TestZNE:
    def test_noiseless_trivial(self):
        s = sample_bitstrings(state_L8(), 3000, 4)
        m = ReadoutModel(0.0, 0.0, 0.0, 0.0)
        for obs in ("wall_mean", "wall_var"):
            r = zne_mitigate(s, m, ZNEGrid(alphas=(1,), betas=(1,)), obs)
            assert r.value == r.raw_value

    def test_noiseless_any_grid(self):
        s = sample_bitstrings(state_L8(), 3000, 4)
        m = ReadoutModel(0.0, 0.0, 0.0, 0.0)
        r = zne_mitigate(s, m, ZNEGrid(), "wall_mean")
        assert abs(r.value - r.raw_value) <= r.stat_err + 1e-12

    def test_constant_grid_extrapolates_constant(self):
        grid = ZNEGrid()
        pts = {(i, j): (2.5, 0.1) for i in range(3) for j in range(3)}
        for order in ("linear", "quadratic"):
            v, s, inter, _ = extrapolate_grid(pts, ReadoutModel(), grid, order)
            assert v == pytest.approx(2.5) and s > 0 and len(inter) == 3

    @pytest.mark.parametrize("seed", [0, 1])
    def test_synthetic_closure(self, seed):
        state = state_L8(7)
        exact_mean, exact_var = defect_moments(state)
        m = ReadoutModel()
        raw = sample_bitstrings(state, 10 ** 5, seed)
        noisy = apply_readout_noise(raw, m.eps01, m.eps10, seed + 100)
        r = mitigate(noisy, m, ZNEGrid(seed=seed))
        assert r.order10 == "linear" and r.sys_err > 0
        assert abs(r.value - exact_mean) <= 2 * r.total_err
        assert abs(r.raw_value - exact_mean) > 5 * r.raw_err
        ci, ci_err = confusion_inverse_mean(noisy, m)
        assert abs(ci - exact_mean) <= 2 * ci_err + 2 * r.sys_err
        assert abs(ci - r.value) <= 2 * np.hypot(ci_err, r.total_err)
        rv = mitigate(noisy, m, ZNEGrid(seed=seed), "wall_var")
        assert rv.order10 == "quadratic"
        assert abs(rv.value - exact_var) <= 2 * rv.total_err

    def test_quadratic_beats_linear_analytically(self):
        # infinite-shot version: grid values are exact expectations
        state = state_L8(7)
        exact_var = defect_moments(state)[1]
        m = ReadoutModel()
        grid = ZNEGrid()
        points = {(i, j): (noisy_wall_moments(state, a * m.eps01, b * m.eps10)[1], 0.0)
                  for (i, a), (j, b) in itertools.product(enumerate(grid.alphas),
                                                          enumerate(grid.betas))}
        lin = extrapolate_grid(points, m, grid, "linear")[0]
        quad = extrapolate_grid(points, m, grid, "quadratic")[0]
        assert abs(quad - exact_var) < abs(lin - exact_var)

    def test_deterministic_and_serialisable(self):
        s = apply_readout_noise(sample_bitstrings(state_L8(), 2000, 1), 0.009, 0.061, 2)
        a = mitigate(s, ReadoutModel(), ZNEGrid(seed=3)).to_dict()
        b = mitigate(s, ReadoutModel(), ZNEGrid(seed=3)).to_dict()
        assert a == b
        assert len(a["grid_values"]) == 9 and len(a["intermediate"]) == 3
        assert a["stat_err"] >= 0 and a["sys_err"] >= 0

    def test_systematic_zero_and_monotone(self):
        s = apply_readout_noise(sample_bitstrings(state_L8(), 5000, 1), 0.009, 0.061, 2)
        grid = ZNEGrid(repeats=2)
        assert systematic_error(s, ReadoutModel(d_eps01=0, d_eps10=0), grid) == 0.0
        small = systematic_error(s, ReadoutModel(d_eps01=0, d_eps10=0.004), grid)
        big = systematic_error(s, ReadoutModel(d_eps01=0, d_eps10=0.008), grid)
        assert 0 < small <= big
        corners = systematic_error(s, ReadoutModel(), grid, corners=True)
        assert corners > 0

    def test_estimator(self):
        s = apply_readout_noise(sample_bitstrings(state_L8(), 3000, 1), 0.009, 0.061, 2)
        est = ZeroNoiseExtrapolator(repeats=2).fit(s)
        direct = mitigate(s, ReadoutModel(), ZNEGrid(repeats=2))
        assert est.predict() == direct.value and est.sys_err_ == direct.sys_err
        est2 = ZeroNoiseExtrapolator(repeats=2).fit(s.bits())
        assert est2.value_ == pytest.approx(direct.value)
        with pytest.raises(ValueError):
            ZeroNoiseExtrapolator().fit(np.array([[0, 2]]))


def test_readout_model_validation():
    with pytest.raises(ValueError):
        ReadoutModel(eps01=0.6)
    with pytest.raises(ValueError):
        ReadoutModel(d_eps10=-1)
    m = ReadoutModel.from_dict({"eps01": 0.01, "eps10": 0.05, "d_eps01": 0, "d_eps10": 0.001})
    assert ReadoutModel.from_dict(m.to_dict()) == m
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ReadoutModel(0.0, 0.0)
