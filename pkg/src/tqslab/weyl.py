"""Sterile massless (Weyl) fermion reduced to one spatial dimension.

``H = -chi * c * sigma_z (x) p_z`` with ``chi = +1`` for the ``+`` chirality and
``-1`` for ``-``; basis ordering is spin (x) space with spin up first.  Each
spin block is a pure translation generator, so a position eigenstate moves
rigidly by one site per ``dz / c`` of time.  The direction depends on
chirality and spin as recorded in :data:`SHIFT_DIRECTION`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import TQSError
from .hilbert import (
    TOL_SPEC,
    GridSpec,
    Operator,
    StateVector,
    TranslationalCertificate,
    evolve,
    translation_generator,
    translational_certificate,
)

SIGMA_Z = np.diag([1.0, -1.0])

SPINS = ("up", "down")
CHIRALITIES = ("+", "-")

# direction of rigid transport along z, in grid sites per dz/c of time
SHIFT_DIRECTION = {
    ("+", "up"): -1,
    ("+", "down"): +1,
    ("-", "up"): +1,
    ("-", "down"): -1,
}


@dataclass(frozen=True)
class WeylModel:
    z_grid: GridSpec
    chirality: str = "+"
    c: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.chirality not in CHIRALITIES:
            raise TQSError(f"chirality must be '+' or '-', got {self.chirality!r}")
        if not self.c > 0:
            raise TQSError("speed c must be positive")
        if not self.hbar > 0:
            raise TQSError("hbar must be positive")

    @property
    def dim(self) -> int:
        return 2 * self.z_grid.n_points

    @property
    def chirality_sign(self) -> int:
        return 1 if self.chirality == "+" else -1

    @property
    def time_step(self) -> float:
        """Time for light to cross one grid cell."""
        return self.z_grid.spacing / self.c


@lru_cache(maxsize=64)
def build_weyl_hamiltonian(model: WeylModel) -> Operator:
    p = translation_generator(model.z_grid, model.hbar)
    pref = -model.chirality_sign * model.c
    op = Operator(pref * np.kron(SIGMA_Z, p.matrix), frozenset({"hermitian"}))
    w_p, v_p = p.eigh
    w = pref * np.kron(np.diag(SIGMA_Z), w_p)
    v = np.kron(np.eye(2), v_p)
    order = np.argsort(w, kind="stable")
    op.__dict__["eigh"] = (w[order], v[:, order])
    return op


def spin_block(model: WeylModel, spin: str) -> Operator:
    """The ``n x n`` block of the Hamiltonian acting on one spin component."""
    i = _spin_index(spin)
    n = model.z_grid.n_points
    h = build_weyl_hamiltonian(model).matrix
    return Operator(h[i * n:(i + 1) * n, i * n:(i + 1) * n], frozenset({"hermitian"}))


def _spin_index(spin: str) -> int:
    if spin not in SPINS:
        raise TQSError(f"spin must be 'up' or 'down', got {spin!r}")
    return SPINS.index(spin)


def shift_direction(model: WeylModel, spin: str) -> int:
    _spin_index(spin)
    return SHIFT_DIRECTION[(model.chirality, spin)]


def localized_state(model: WeylModel, spin: str, site: int) -> StateVector:
    n = model.z_grid.n_points
    return StateVector.basis(model.dim, _spin_index(spin) * n + site % n)


def lightlike_shift_check(model: WeylModel, spin: str, k: int, start: int = 0) -> float:
    """Distance between the evolved and the rigidly shifted position eigenstate.

    Evolves ``|z_start> (x) |spin>`` for ``t = k dz / c`` and compares with
    ``|z_{start + direction * k}>``, with the direction from
    :data:`SHIFT_DIRECTION`.
    """
    n = model.z_grid.n_points
    if abs(k) > n:
        raise TQSError(f"|k| must not exceed n_points={n}")
    H = build_weyl_hamiltonian(model)
    got = evolve(H, k * model.time_step, localized_state(model, spin, start), model.hbar)
    want = localized_state(model, spin, start + shift_direction(model, spin) * k)
    return float(np.linalg.norm(got.amplitudes - want.amplitudes))


def spin_commutator_residual(model: WeylModel) -> float:
    """``|| [H, sigma_z (x) I] ||`` (Frobenius)."""
    h = build_weyl_hamiltonian(model).matrix
    s = np.kron(SIGMA_Z, np.eye(model.z_grid.n_points))
    return float(np.linalg.norm(h @ s - s @ h))


def block_certificate(model: WeylModel, spin: str, tol_spec: float = TOL_SPEC) -> TranslationalCertificate:
    """Lattice certificate of one spin block, read on the branch of ``U(dz/c)``."""
    return translational_certificate(spin_block(model, spin), model.hbar, branch_step=model.time_step, tol_spec=tol_spec)


def combined_certificate(model: WeylModel, tol_spec: float = TOL_SPEC) -> TranslationalCertificate:
    """Certificate of the full Hamiltonian; the two mirrored blocks give multiplicity 2."""
    return translational_certificate(build_weyl_hamiltonian(model), model.hbar, branch_step=model.time_step, tol_spec=tol_spec)
