"""A translational clock composed with an arbitrary closed system.

``H_{C+R} = H_C (x) I + I (x) H_R`` on clock (x) system.  Starting from a clock
position eigenstate, the histories ``U(k dtau) |eta(0)>|b>`` are mutually
orthogonal and span the whole space, so the total Hamiltonian is itself a
translation generator.

On a finite cyclic clock this is exact only when every system energy sits on
the clock frequency lattice ``hbar * (2 pi / period) * Z``; that condition is
checked explicitly.  The Kronecker sum then generates the right evolution at
grid times, but its eigenvalues can fall outside the symmetric window of the
clock; the certified Hamiltonian is therefore the symmetric-branch generator
of ``U(dtau)``, which agrees with ``H_{C+R}`` at every grid time.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, IncommensurateError, NotHermitianError, TQSError
from .hilbert import (
    TOL_ALG,
    TOL_SPEC,
    GridSpec,
    Operator,
    StateVector,
    TranslationalCertificate,
    branch_generator,
    evolve,
    kronecker_sum,
    time_operator,
    translation_generator,
    translational_certificate,
)


@dataclass(frozen=True, eq=False)
class CompositeSystem:
    clock_grid: GridSpec
    system_hamiltonian: Operator
    clock_hamiltonian: Operator
    total_hamiltonian: Operator
    hbar: float = 1.0

    @property
    def clock_dim(self) -> int:
        return self.clock_grid.n_points

    @property
    def system_dim(self) -> int:
        return self.system_hamiltonian.dim

    @property
    def dim(self) -> int:
        return self.total_hamiltonian.dim

    @property
    def lattice_step(self) -> float:
        """Clock frequency lattice spacing ``2 pi / period``."""
        return 2.0 * np.pi / self.clock_grid.period

    @cached_property
    def translational_hamiltonian(self) -> Operator:
        """Symmetric-branch generator of ``U_{C+R}(dtau)``."""
        return branch_generator(self.total_hamiltonian, self.clock_grid.spacing, self.hbar)

    def clock_time_operator(self) -> Operator:
        """``tau_C (x) I_R``."""
        return Operator(
            np.kron(time_operator(self.clock_grid).matrix, np.eye(self.system_dim)),
            frozenset({"hermitian", "diagonal"}),
        )


def compose(clock_grid: GridSpec, H_R: Operator, hbar: float = 1.0) -> CompositeSystem:
    if not H_R.is_hermitian():
        raise NotHermitianError("system Hamiltonian must be Hermitian")
    H_C = translation_generator(clock_grid, hbar)
    total = kronecker_sum(H_C, H_R)
    # eigenpairs of a Kronecker sum are sums/products of the factors' eigenpairs
    wc, vc = H_C.eigh
    wr, vr = H_R.eigh
    w = (wc[:, None] + wr[None, :]).reshape(-1)
    v = np.kron(vc, vr)
    order = np.argsort(w, kind="stable")
    total.__dict__["eigh"] = (w[order], v[:, order])
    return CompositeSystem(clock_grid, H_R, H_C, total, hbar)


def commensurability(comp: CompositeSystem) -> tuple[np.ndarray, float]:
    """Nearest clock-lattice integers for the system energies, and the worst residual.

    The residual is in angular-frequency units.
    """
    omega = comp.system_hamiltonian.eigh[0] / comp.hbar
    step = comp.lattice_step
    m = np.round(omega / step)
    return m.astype(int), float(np.max(np.abs(omega - m * step)))


def _require_commensurate(comp: CompositeSystem, tol: float) -> None:
    _, residual = commensurability(comp)
    if residual > tol:
        raise IncommensurateError(
            f"system spectrum is off the clock lattice 2*pi/{comp.clock_grid.period:g} "
            f"(nearest-lattice residual {residual:.3g})",
            residual=residual,
        )


def clock_eigenstate(comp: CompositeSystem, index: int = 0) -> StateVector:
    return StateVector.basis(comp.clock_dim, index)


def history_vectors(comp: CompositeSystem, b_states: Sequence[StateVector]) -> np.ndarray:
    """Columns ``U_{C+R}(k dtau) (|eta(0)> (x) |b>)``, ``b``-major, ``k = 0..n-1``."""
    eta0 = clock_eigenstate(comp)
    cols = []
    for b in b_states:
        if b.dim != comp.system_dim:
            raise DimensionMismatchError(f"system state has dim {b.dim}, expected {comp.system_dim}")
        start = eta0.tensor(b)
        for k in range(comp.clock_dim):
            cols.append(evolve(comp.total_hamiltonian, k * comp.clock_grid.spacing, start, comp.hbar).amplitudes)
    return np.stack(cols, axis=1)


def history_gram(comp: CompositeSystem, b_states: Sequence[StateVector]) -> np.ndarray:
    v = history_vectors(comp, b_states)
    return v.conj().T @ v


def history_gram_check(comp: CompositeSystem, b_states: Sequence[StateVector]) -> float:
    """Largest off-diagonal Gram entry among the grid-time histories."""
    g = history_gram(comp, b_states)
    off = g - np.diag(np.diag(g))
    return float(np.max(np.abs(off))) if off.size > 1 else 0.0


def evolution_factorization_residual(comp: CompositeSystem, t: float, eta: StateVector, b: StateVector) -> float:
    """``|| U_{C+R}(t)(eta (x) b) - U_C(t) eta (x) U_R(t) b ||``."""
    joint = evolve(comp.total_hamiltonian, t, eta.tensor(b), comp.hbar)
    split = evolve(comp.clock_hamiltonian, t, eta, comp.hbar).tensor(evolve(comp.system_hamiltonian, t, b, comp.hbar))
    return float(np.linalg.norm(joint.amplitudes - split.amplitudes))


def theorem2_certificate(comp: CompositeSystem, tol_alg: float = TOL_ALG, tol_spec: float = TOL_SPEC) -> TranslationalCertificate:
    """Certify that the composite is translational with multiplicity ``dim(H_R)``.

    Raises IncommensurateError (with the nearest-lattice residual) when the
    system energies are off the clock lattice.
    """
    _require_commensurate(comp, tol_alg)
    return translational_certificate(
        comp.total_hamiltonian, comp.hbar, branch_step=comp.clock_grid.spacing, tol_spec=tol_spec
    )


@dataclass(frozen=True, eq=False)
class PageWoottersResult:
    state: StateVector
    constraint_residual: float
    invariance_residual: float
    raw_constraint_residual: float
    commensurate: bool
    lattice_residual: float


def page_wootters_state(
    comp: CompositeSystem,
    psi0: StateVector,
    *,
    allow_incommensurate: bool = False,
    tol_alg: float = TOL_ALG,
) -> PageWoottersResult:
    """History-summed state ``sum_k |tau_k> (x) U_R(k dtau) |psi0>`` and its residuals.

    ``constraint_residual`` is ``||H |Psi>|| / ||Psi||`` for the certified
    (symmetric-branch) total Hamiltonian, ``raw_constraint_residual`` the same
    for the literal Kronecker sum, and ``invariance_residual`` is
    ``||U(dtau)|Psi> - |Psi>|| / ||Psi||``.  The vector is returned
    unnormalized.

    Raises IncommensurateError, carrying the residuals, unless
    ``allow_incommensurate`` is set.
    """
    if psi0.dim != comp.system_dim:
        raise DimensionMismatchError(f"psi0 has dim {psi0.dim}, expected {comp.system_dim}")
    dt = comp.clock_grid.spacing
    n = comp.clock_dim
    parts = np.zeros((n, comp.system_dim), dtype=complex)
    for k in range(n):
        parts[k] = evolve(comp.system_hamiltonian, k * dt, psi0, comp.hbar).amplitudes
    psi = StateVector(parts.reshape(-1), normalized=False)
    norm = psi.norm

    h = comp.translational_hamiltonian.matrix
    constraint = float(np.linalg.norm(h @ psi.amplitudes)) / norm
    raw = float(np.linalg.norm(comp.total_hamiltonian.matrix @ psi.amplitudes)) / norm
    shifted = evolve(comp.total_hamiltonian, dt, psi, comp.hbar)
    invariance = float(np.linalg.norm(shifted.amplitudes - psi.amplitudes)) / norm

    _, lattice_residual = commensurability(comp)
    ok = lattice_residual <= tol_alg
    result = PageWoottersResult(psi, constraint, invariance, raw, ok, lattice_residual)
    if not ok and not allow_incommensurate:
        err = IncommensurateError(
            f"system spectrum is off the clock lattice; constraint residual {constraint:.3g}, "
            f"invariance residual {invariance:.3g}",
            residual=lattice_residual,
        )
        err.result = result
        raise err
    return result


def lattice_system(clock_grid: GridSpec, integers: Sequence[int], hbar: float = 1.0) -> Operator:
    """Diagonal system Hamiltonian with energies ``hbar * (2 pi / period) * m``."""
    step = 2.0 * np.pi / clock_grid.period
    return Operator(np.diag(hbar * step * np.asarray(integers, dtype=float)), frozenset({"hermitian", "diagonal"}))


def random_commensurate_system(rng: np.random.Generator, clock_grid: GridSpec, dim: int, hbar: float = 1.0, max_integer: int = 12) -> Operator:
    """Commensurate Hamiltonian ``V diag(lattice energies) V^dag`` with Haar-random ``V``."""
    from scipy.stats import unitary_group

    if dim < 1:
        raise TQSError("system dimension must be positive")
    m = rng.integers(-max_integer, max_integer + 1, size=dim)
    d = lattice_system(clock_grid, m, hbar).matrix
    v = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.eye(1)
    h = v @ d @ v.conj().T
    return Operator(0.5 * (h + h.conj().T), frozenset({"hermitian"}))
