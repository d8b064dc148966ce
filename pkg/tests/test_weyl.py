import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from tqslab.errors import TQSError
from tqslab.hilbert import GridSpec, translation_generator
from tqslab.weyl import (
    SHIFT_DIRECTION,
    WeylModel,
    block_certificate,
    build_weyl_hamiltonian,
    combined_certificate,
    lightlike_shift_check,
    localized_state,
    shift_direction,
    spin_block,
    spin_commutator_residual,
)


class TestHamiltonian:
    def test_spin_up_block(self):
        m = WeylModel(GridSpec(4), "+", c=1.5)
        np.testing.assert_allclose(spin_block(m, "up").matrix, -1.5 * translation_generator(GridSpec(4)).matrix)
        np.testing.assert_allclose(spin_block(m, "down").matrix, 1.5 * translation_generator(GridSpec(4)).matrix)
        w = np.linalg.eigvalsh(spin_block(m, "up").matrix)
        np.testing.assert_allclose(w, np.sort(-1.5 * np.array([-np.pi, -np.pi / 2, 0, np.pi / 2])), atol=1e-12)

    def test_chirality_flip(self):
        g = GridSpec(6, 0.5)
        np.testing.assert_allclose(build_weyl_hamiltonian(WeylModel(g, "-")).matrix, -build_weyl_hamiltonian(WeylModel(g, "+")).matrix)

    def test_seeded_eigenpairs(self):
        H = build_weyl_hamiltonian(WeylModel(GridSpec(6), "-", 2.0))
        w, v = H.eigh
        np.testing.assert_allclose(H.matrix @ v, v * w, atol=1e-10)

    def test_invalid(self):
        with pytest.raises(TQSError):
            WeylModel(GridSpec(4), "x")
        with pytest.raises(TQSError):
            WeylModel(GridSpec(4), c=0.0)
        with pytest.raises(TQSError):
            lightlike_shift_check(WeylModel(GridSpec(4)), "sideways", 1)


class TestShift:
    def test_example(self):
        m = WeylModel(GridSpec(16))
        assert lightlike_shift_check(m, "up", 3) <= 1e-10
        assert lightlike_shift_check(m, "up", 0) == 0.0
        assert shift_direction(m, "down") == -shift_direction(m, "up")

    def test_direction_against_expm(self):
        # oracle: dense exponential and np.roll on the spatial factor
        m = WeylModel(GridSpec(16, 0.5), "+", c=2.0)
        H = build_weyl_hamiltonian(m).matrix
        u = scipy.linalg.expm(-1j * 3 * m.time_step * H)
        for spin in ("up", "down"):
            got = u @ localized_state(m, spin, 5).amplitudes
            space = np.roll(np.eye(16)[5], SHIFT_DIRECTION[("+", spin)] * 3)
            want = np.kron(np.eye(2)[0 if spin == "up" else 1], space)
            assert np.linalg.norm(got - want) <= 1e-10

    def test_k_bound(self):
        with pytest.raises(TQSError):
            lightlike_shift_check(WeylModel(GridSpec(4)), "up", 5)

    @settings(max_examples=30, deadline=None)
    @given(
        st.integers(1, 64),
        st.sampled_from(["+", "-"]),
        st.sampled_from(["up", "down"]),
        st.sampled_from([0.5, 1.0, 3.0]),
        st.data(),
    )
    def test_rigid_transport(self, n, chi, spin, c, data):
        m = WeylModel(GridSpec(n, 0.25), chi, c)
        k = data.draw(st.integers(-n, n))
        start = data.draw(st.integers(0, n - 1))
        assert lightlike_shift_check(m, spin, k, start) <= 1e-10


class TestStructure:
    @pytest.mark.parametrize("n", [1, 2, 5, 8, 33, 64])
    def test_commutes_with_spin(self, n):
        assert spin_commutator_residual(WeylModel(GridSpec(n))) <= 1e-12

    @pytest.mark.parametrize("n", [2, 3, 8, 9, 16])
    @pytest.mark.parametrize("chi", ["+", "-"])
    def test_block_certificates(self, n, chi):
        m = WeylModel(GridSpec(n, 0.5), chi, 2.0)
        for spin in ("up", "down"):
            c = block_certificate(m, spin)
            assert c.passes and c.multiplicity == 1
        c = combined_certificate(m)
        assert c.passes and c.multiplicity == 2
