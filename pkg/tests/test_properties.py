"""Randomised invariants across modules."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kzdefects.analysis import fit_correlation_length, fit_power_law, hold_spectrum
from kzdefects.basis import cyclic_shift, enumerate_basis, reflect
from kzdefects.evolve import IntegratorConfig, evolve, initial_vacuum
from kzdefects.geometry import ring_positions
from kzdefects.hamiltonian import (RydbergParams, build_hamiltonian, build_kz_protocol,
                                   gamma_rate, t_delta_for_rate)
from kzdefects.observables import (QuantumState, defect_correlations, defect_distribution,
                                   defect_moments, density_correlations)

from conftest import random_state

SETTINGS = settings(max_examples=40, deadline=None)
even_rings = st.sampled_from([4, 6, 8, 10])
seeds = st.integers(0, 2 ** 31)


@given(L=st.integers(3, 12), seed=seeds, boundary=st.sampled_from(["periodic", "open"]))
@SETTINGS
def test_basis_index_roundtrip(L, seed, boundary):
    b = enumerate_basis(L, boundary)
    k = np.random.default_rng(seed).integers(0, b.dim)
    assert b.index(int(b.states[k])) == k
    assert b.contains(int(b.states[k]))


@given(L=st.integers(3, 12), seed=seeds)
@SETTINGS
def test_ring_parity(L, seed):
    b = enumerate_basis(L, "periodic")
    d = defect_distribution(QuantumState(random_state(b.dim, seed), b))
    odd = sum(p for k, p in d.pmf.items() if k % 2 != L % 2)
    assert odd < 1e-12


@given(L=even_rings, seed=seeds, shift=st.integers(1, 9))
@SETTINGS
def test_translation_and_reflection_covariance(L, seed, shift):
    b = enumerate_basis(L, "periodic")
    s = QuantumState(random_state(b.dim, seed), b)
    for moved in (cyclic_shift(b.states, L, shift % L), reflect(b.states, L)):
        t = QuantumState(s.amplitudes[np.argsort(b.indices(moved))], b)
        # t has amplitude of s on the mapped configuration
        np.testing.assert_allclose(density_correlations(t), density_correlations(s), atol=1e-12)
        np.testing.assert_allclose(defect_correlations(t), defect_correlations(s), atol=1e-12)
        assert defect_moments(t) == pytest.approx(defect_moments(s), abs=1e-12)


@given(L=st.integers(3, 9), seed=seeds, omega=st.floats(0, 20), delta=st.floats(-20, 30))
@SETTINGS
def test_hamiltonian_hermitian(L, seed, omega, delta):
    b = enumerate_basis(L, "periodic")
    H = build_hamiltonian(b, ring_positions(L, 6.2), RydbergParams())
    x, y = random_state(b.dim, seed), random_state(b.dim, seed + 1)
    hx, hy = H.apply_static(omega, delta, x), H.apply_static(omega, delta, y)
    assert np.vdot(y, hx) == pytest.approx(np.conj(np.vdot(x, hy)), abs=1e-9)


@given(g=st.floats(0.05, 500))
@SETTINGS
def test_rate_inverse(g):
    p = RydbergParams()
    assert gamma_rate(t_delta_for_rate(g, p), p) == pytest.approx(g, rel=1e-12)


@given(xi=st.floats(0.3, 20), amp=st.floats(1e-3, 10), scale=st.floats(1e-3, 1e3),
       noise=st.integers(0, 1000))
@SETTINGS
def test_corr_fit_scale_invariant(xi, amp, scale, noise):
    l = np.arange(11)
    vals = amp * np.exp(-l / xi) * (1 + 0.05 * np.random.default_rng(noise).normal(size=11))
    assume(np.all(vals[1:7] > 1e-10) and np.all(vals[1:7] * scale > 1e-10))
    a = fit_correlation_length(l, vals)
    b = fit_correlation_length(l, scale * vals)
    assert b["xi"] == pytest.approx(a["xi"], rel=1e-9)


@given(mu=st.floats(-2, 2), amp=st.floats(1e-2, 1e2))
@SETTINGS
def test_power_law_exact(mu, amp):
    g = np.geomspace(0.2, 100, 12)
    res = fit_power_law(g, amp * g ** -mu, window=(0.2, 100))
    assert res["mu"] == pytest.approx(mu, abs=1e-9)


@given(n=st.integers(16, 300), seed=seeds, dt=st.floats(1e-3, 1.0))
@SETTINGS
def test_parseval(n, seed, dt):
    x = np.random.default_rng(seed).normal(size=n)
    sp = hold_spectrum(np.arange(n) * dt, x)
    assert np.sum(sp.magnitudes ** 2) == pytest.approx(np.sum((x - x.mean()) ** 2), rel=1e-9)


@given(t_delta=st.floats(0.1, 1.0))
@settings(max_examples=6, deadline=None)
def test_evolution_unitary_and_symmetric(t_delta):
    L = 8
    b = enumerate_basis(L, "periodic")
    p = RydbergParams()
    H = build_hamiltonian(b, ring_positions(L, 6.2), p, build_kz_protocol(t_delta, p))
    _, psi = evolve(H, initial_vacuum(b), 0.0, H.protocol.duration, IntegratorConfig())
    assert psi.norm == pytest.approx(1.0, abs=1e-9)
    # the vacuum and H are rotation invariant, so the final state is too
    rot = b.indices(cyclic_shift(b.states, L, 1))
    np.testing.assert_allclose(psi.amplitudes[rot], psi.amplitudes, atol=1e-7)
