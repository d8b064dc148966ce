import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from tqslab.errors import GridFactorizationError, NonBijectiveError, OrbitLengthError, TQSError
from tqslab.hilbert import GridSpec, StateVector
from tqslab.koopman import (
    DynamicalSystem,
    ccr_dichotomy_report,
    cycle_system,
    drift_phase_system,
    exponential_consistency,
    koopman_lift,
    observable_operator,
    orbit_decomposition,
    phase_grid_operators,
    power_residuals,
    random_equal_orbit_system,
    relabeled,
    theorem3_certificate,
)


def brute_orbits(step):
    """Oracle: follow each state until it returns."""
    out = set()
    for s in range(len(step)):
        cyc = [s]
        t = step[s]
        while t != s:
            cyc.append(t)
            t = step[t]
        out.add(frozenset(cyc))
    return out


class TestDynamicalSystem:
    def test_not_bijective(self):
        with pytest.raises(NonBijectiveError):
            DynamicalSystem((0, 0, 1))
        with pytest.raises(NonBijectiveError):
            DynamicalSystem((0, 3))

    def test_measure_preservation(self):
        DynamicalSystem((1, 0, 2), weights=(2.0, 2.0, 5.0))
        with pytest.raises(TQSError):
            DynamicalSystem((1, 0), weights=(1.0, 2.0))
        with pytest.raises(TQSError):
            DynamicalSystem((1, 0), weights=(1.0, -1.0))

    def test_properties_and_shape(self):
        with pytest.raises(TQSError):
            DynamicalSystem((1, 0), properties={"f": [1.0]})
        with pytest.raises(GridFactorizationError):
            DynamicalSystem((1, 2, 0), shape=(2, 2))

    def test_iterate(self):
        d = cycle_system([5])
        assert d.iterate(0, 7) == 2
        assert d.iterate(0, -1) == 4

    @settings(max_examples=30, deadline=None)
    @given(st.permutations(list(range(12))))
    def test_orbit_decomposition(self, perm):
        orbits = orbit_decomposition(perm)
        assert {frozenset(o) for o in orbits} == brute_orbits(perm)
        assert [o[0] for o in orbits] == sorted(o[0] for o in orbits)
        for o in orbits:
            assert o[0] == min(o)
            for a, b in zip(o, o[1:] + o[:1]):
                assert perm[a] == b


class TestLift:
    def test_six_cycle(self):
        rep = koopman_lift(cycle_system([6], dt=0.5))
        p = rep.step_unitary.matrix
        for s in range(6):
            assert p[(s + 1) % 6, s] == 1
        w = np.linalg.eigvalsh(rep.hamiltonian.matrix)
        np.testing.assert_allclose(w, (1 / 0.5) * 2 * np.pi * np.arange(-3, 3) / 6, atol=1e-12)

    def test_identity(self):
        rep = koopman_lift(DynamicalSystem((0, 1, 2)))
        np.testing.assert_array_equal(rep.step_unitary.matrix, np.eye(3))
        np.testing.assert_array_equal(rep.hamiltonian.matrix, np.zeros((3, 3)))

    def test_two_four_cycles(self):
        rep = koopman_lift(cycle_system([4, 4]))
        h = rep.hamiltonian.matrix
        assert np.max(np.abs(h[:4, 4:])) == 0
        w = np.linalg.eigvalsh(h)
        np.testing.assert_allclose(w, np.repeat(np.pi / 2 * np.arange(-2, 2), 2), atol=1e-12)

    def test_expm_reproduces_permutation(self):
        rep = koopman_lift(cycle_system([3, 5, 2], dt=0.7), hbar=1.3)
        u = scipy.linalg.expm(-1j * 0.7 * rep.hamiltonian.matrix / 1.3)
        np.testing.assert_allclose(u, rep.step_unitary.matrix, atol=1e-10)
        assert exponential_consistency(rep) <= 1e-10

    @settings(max_examples=25, deadline=None)
    @given(st.permutations(list(range(10))), st.sampled_from([0.25, 1.0, 2.0]))
    def test_any_bijection(self, perm, dt):
        rep = koopman_lift(DynamicalSystem(tuple(perm), dt))
        u = rep.step_unitary.matrix
        assert np.max(np.abs(u.conj().T @ u - np.eye(10))) <= 1e-12
        assert exponential_consistency(rep) <= 1e-10
        assert np.max(power_residuals(rep)) <= 1e-10
        w, v = rep.hamiltonian.eigh
        np.testing.assert_allclose(rep.hamiltonian.matrix @ v, v * w, atol=1e-10)


class TestObservables:
    def test_examples(self):
        rep = koopman_lift(cycle_system([6], properties={"pos": np.arange(6.0)}))
        np.testing.assert_array_equal(observable_operator(rep, "pos").matrix, np.diag(np.arange(6.0)))
        np.testing.assert_array_equal(observable_operator(rep, lambda s: 1.0).matrix, np.eye(6))
        np.testing.assert_array_equal(observable_operator(rep, [2.0] * 6).matrix, 2 * np.eye(6))
        with pytest.raises(TQSError):
            observable_operator(rep, "missing")
        with pytest.raises(TQSError):
            observable_operator(rep, [1.0, 2.0])

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_commute_exactly(self, seed):
        rng = np.random.default_rng(seed)
        rep = koopman_lift(cycle_system([7]))
        f = observable_operator(rep, rng.normal(size=7)).matrix
        g = observable_operator(rep, rng.normal(size=7)).matrix
        assert np.array_equal(f @ g, g @ f)

    def test_weights_stay_out_of_operator(self):
        rep = koopman_lift(DynamicalSystem((1, 0), weights=(3.0, 3.0), properties={"f": [1.0, 2.0]}))
        np.testing.assert_array_equal(observable_operator(rep, "f").matrix, np.diag([1.0, 2.0]))


class TestOrbitCertificate:
    def test_one_cycle(self):
        r = theorem3_certificate(koopman_lift(cycle_system([8])))
        assert r.certificate.passes and r.certificate.multiplicity == 1 and r.basis_preserved
        assert r.horizon == 8.0

    def test_three_cycles(self):
        r = theorem3_certificate(koopman_lift(cycle_system([4, 4, 4], dt=0.5)))
        assert r.certificate.passes and r.certificate.multiplicity == 3
        assert r.certificate.lattice_step == pytest.approx(2 * np.pi / (4 * 0.5))

    def test_unequal_lengths(self):
        with pytest.raises(OrbitLengthError) as info:
            theorem3_certificate(koopman_lift(cycle_system([4, 6])))
        assert sorted(info.value.lengths) == [4, 6]

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_equal_orbits(self, seed):
        rng = np.random.default_rng(seed)
        L = int(rng.integers(1, 9))
        k = int(rng.integers(1, 64 // L + 1))
        rep = koopman_lift(random_equal_orbit_system(rng, k, L, float(rng.choice([0.5, 1.0]))))
        r = theorem3_certificate(rep)
        assert r.certificate.passes and r.certificate.multiplicity == k and r.basis_preserved

    def test_relabeling_preserves_certificate(self):
        d = cycle_system([5, 5], properties={"f": np.arange(10.0)})
        perm = np.random.default_rng(3).permutation(10)
        e = relabeled(d, perm)
        for s in range(10):
            assert e.step[perm[s]] == perm[d.step[s]]
            assert e.properties["f"][perm[s]] == d.properties["f"][s]
        assert theorem3_certificate(koopman_lift(e)).certificate.multiplicity == 2


class TestCCR:
    def test_four_by_four(self):
        rep = koopman_lift(drift_phase_system(4, 4))
        r = ccr_dichotomy_report(rep, GridSpec(4), GridSpec(4))
        assert r.commutator_qp == 0.0
        assert r.weyl_residual <= 1e-12
        assert r.generator_support >= 2
        assert r.observable_support == 1
        assert r.infinitesimal_defect > 0.1

    def test_trace_obstruction(self):
        rep = koopman_lift(drift_phase_system(6, 3))
        q, _, d = phase_grid_operators(rep, GridSpec(6), GridSpec(3))
        comm = q.matrix @ d.matrix - d.matrix @ q.matrix
        assert abs(np.trace(comm)) <= 1e-9
        r = ccr_dichotomy_report(rep, GridSpec(6), GridSpec(3))
        assert r.infinitesimal_defect >= r.trace_bound - 1e-9

    def test_q_shift_is_basis_permutation(self):
        rep = koopman_lift(drift_phase_system(4, 3))
        _, _, d = phase_grid_operators(rep, GridSpec(4), GridSpec(3))
        u = scipy.linalg.expm(-1j * d.matrix)
        # a unit step along q moves state (q, p) to (q + 1, p)
        for s in range(12):
            out = u @ StateVector.basis(12, s).amplitudes
            iq, ip = divmod(s, 3)
            assert abs(out[((iq + 1) % 4) * 3 + ip]) == pytest.approx(1.0)

    def test_not_factorizable(self):
        rep = koopman_lift(drift_phase_system(4, 4))
        with pytest.raises(GridFactorizationError):
            phase_grid_operators(rep, GridSpec(3), GridSpec(5))
        with pytest.raises(GridFactorizationError):
            phase_grid_operators(rep, GridSpec(2), GridSpec(8))

    def test_drift_orbits(self):
        d = drift_phase_system(4, 16, 8)
        assert {len(o) for o in orbit_decomposition(d.step)} == {8}
        assert len(orbit_decomposition(d.step)) == 8
