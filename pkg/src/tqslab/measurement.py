"""Standard model of ideal (von Neumann) measurements.

The observed system carries ``O = diag(lambda)`` (each eigenvalue repeated per
degeneracy) and the pointer a cyclic coordinate ``zeta`` with conjugate
momentum ``p_M``.  The interaction ``H = g O (x) p_M`` translates the pointer
by ``g T lambda`` on the ``lambda`` block.  Basis ordering is system (x) pointer.

On each block the operator ``tau = M / (g lambda)`` is translated by exactly
``s`` under ``U(s)``, which is the operational content of the interaction
Hamiltonian being ``-i hbar d/dtau`` on the total space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np

from .errors import (
    DimensionMismatchError,
    GridAlignmentError,
    TQSError,
    WrapAroundError,
)
from .hilbert import (
    TOL_ALG,
    TOL_SPEC,
    GridSpec,
    Operator,
    StateVector,
    TranslationalCertificate,
    evolve,
    operator_schmidt_rank,
    propagator,
    time_operator,
    translation_generator,
    translational_certificate,
    wrap_into,
)

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class MeasurementModel:
    spectrum: tuple[tuple[float, int], ...]
    pointer_grid: GridSpec
    coupling: float = 1.0
    duration: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        spec = tuple((float(lam), int(deg)) for lam, deg in self.spectrum)
        if not spec:
            raise TQSError("spectrum must contain at least one eigenvalue")
        for (lam, deg), (_, raw_deg) in zip(spec, self.spectrum):
            if lam == 0 or not math.isfinite(lam):
                raise TQSError(f"measured eigenvalues must be finite and nonzero, got {lam!r}")
            if deg < 1 or deg != raw_deg:
                raise TQSError(f"degeneracy must be a positive integer, got {raw_deg!r}")
        lams = [lam for lam, _ in spec]
        if len(set(lams)) != len(lams):
            raise TQSError("eigenvalues in the spectrum must be distinct")
        if not isinstance(self.pointer_grid, GridSpec):
            raise TQSError("pointer_grid must be a GridSpec")
        if self.pointer_grid.index_of(0.0) is None:
            raise TQSError("pointer grid must contain zeta = 0 (the ready state)")
        if self.coupling == 0 or not math.isfinite(self.coupling):
            raise TQSError("coupling g must be finite and nonzero")
        if not self.duration > 0:
            raise TQSError("duration T must be positive")
        if not self.hbar > 0:
            raise TQSError("hbar must be positive")
        object.__setattr__(self, "spectrum", spec)

    @property
    def system_dim(self) -> int:
        return sum(deg for _, deg in self.spectrum)

    @property
    def pointer_dim(self) -> int:
        return self.pointer_grid.n_points

    @property
    def dim(self) -> int:
        return self.system_dim * self.pointer_dim

    @property
    def system_eigenvalues(self) -> np.ndarray:
        """``lambda`` for every system basis vector ``|lambda, a>``."""
        return np.repeat([lam for lam, _ in self.spectrum], [deg for _, deg in self.spectrum])

    @property
    def ready_index(self) -> int:
        return self.pointer_grid.index_of(0.0)

    def ready_state(self) -> StateVector:
        return StateVector.basis(self.pointer_dim, self.ready_index)

    def eigenstate(self, index: int) -> StateVector:
        """System basis vector number ``index`` (ordered as in ``spectrum``)."""
        return StateVector.basis(self.system_dim, index)


def pointer_momentum(model: MeasurementModel) -> Operator:
    return translation_generator(model.pointer_grid, model.hbar)


@lru_cache(maxsize=64)
def build_interaction_hamiltonian(model: MeasurementModel) -> Operator:
    """``g O (x) p_M``, block diagonal with blocks ``g lambda p_M``."""
    p = pointer_momentum(model)
    o = np.diag(model.system_eigenvalues)
    h = model.coupling * np.kron(o, p.matrix)
    op = Operator(h, frozenset({"hermitian"}))
    # block structure gives the eigenpairs directly
    w_p, v_p = p.eigh
    w = model.coupling * np.kron(model.system_eigenvalues, w_p)
    v = np.kron(np.eye(model.system_dim), v_p)
    order = np.argsort(w, kind="stable")
    op.__dict__["eigh"] = (w[order], v[:, order])
    return op


def pointer_steps(model: MeasurementModel, lam: float, time: float | None = None) -> float:
    """Pointer displacement ``g * time * lambda`` in units of the grid spacing."""
    t = model.duration if time is None else time
    return model.coupling * t * lam / model.pointer_grid.spacing


def _aligned_steps(model: MeasurementModel, lam: float, time: float) -> int | None:
    k = pointer_steps(model, lam, time)
    kr = round(k)
    return int(kr) if abs(k - kr) <= _ALIGN_TOL * max(1.0, abs(k)) else None


def calibrated_outcome(model: MeasurementModel, system_state: StateVector, allow_wrap: bool = False) -> StateVector:
    """The ideal post-measurement state built by index arithmetic.

    Each ``|lambda, a>`` component is paired with the pointer at ``g T lambda``.
    """
    if system_state.dim != model.system_dim:
        raise DimensionMismatchError(f"system state has dim {system_state.dim}, expected {model.system_dim}")
    n = model.pointer_dim
    out = np.zeros((model.system_dim, n), dtype=complex)
    for i, lam in enumerate(model.system_eigenvalues):
        k = _aligned_steps(model, lam, model.duration)
        if k is None:
            raise GridAlignmentError(f"pointer shift g*T*lambda for lambda={lam:g} is not grid aligned")
        target = model.ready_index + k
        if not 0 <= target < n and not allow_wrap:
            raise WrapAroundError(f"pointer shift for lambda={lam:g} leaves the grid")
        out[i, target % n] = system_state.amplitudes[i]
    return StateVector(out.reshape(-1), system_state.normalized)


def simulate_measurement(model: MeasurementModel, system_state: StateVector, allow_wrap: bool = False) -> StateVector:
    """Evolve ``system_state (x) |ready>`` for the measurement duration.

    Raises
    ------
    GridAlignmentError
        If some pointer shift ``g T lambda`` is not a multiple of the pointer
        spacing.  ``leakage`` on the exception is the distance between the
        actually evolved eigenstate and the nearest grid-aligned pointer state.
    WrapAroundError
        If a pointer shift leaves the grid and ``allow_wrap`` is false.
    """
    if system_state.dim != model.system_dim:
        raise DimensionMismatchError(f"system state has dim {system_state.dim}, expected {model.system_dim}")
    H = build_interaction_hamiltonian(model)
    n = model.pointer_dim
    for i, (lam, _) in enumerate(model.spectrum):
        if _aligned_steps(model, lam, model.duration) is None:
            k = pointer_steps(model, lam)
            first = int(sum(d for _, d in model.spectrum[:i]))
            probe = model.eigenstate(first).tensor(model.ready_state())
            moved = evolve(H, model.duration, probe, model.hbar).amplitudes.reshape(model.system_dim, n)[first]
            nearest = (model.ready_index + round(k)) % n
            ideal = np.zeros(n)
            ideal[nearest] = 1.0
            leakage = float(np.linalg.norm(moved - ideal))
            raise GridAlignmentError(
                f"pointer shift g*T*lambda = {k:g} grid steps for lambda={lam:g} is not an integer "
                f"(off-grid leakage {leakage:.3g})",
                leakage=leakage,
            )
        target = model.ready_index + _aligned_steps(model, lam, model.duration)
        if not allow_wrap and not 0 <= target < n:
            raise WrapAroundError(f"pointer shift for lambda={lam:g} reaches index {target}, outside 0..{n - 1}")
    psi = system_state.tensor(model.ready_state())
    return evolve(H, model.duration, psi, model.hbar)


def pointer_distribution(model: MeasurementModel, state: StateVector) -> np.ndarray:
    """Reduced probability distribution of the pointer coordinate."""
    a = state.amplitudes.reshape(model.system_dim, model.pointer_dim)
    return np.sum(np.abs(a) ** 2, axis=0)


@lru_cache(maxsize=64)
def construct_time_operator(model: MeasurementModel) -> Operator:
    """Block-diagonal ``tau`` equal to ``M / (g lambda)`` on each system block."""
    zeta = model.pointer_grid.coordinates
    scale = 1.0 / (model.coupling * model.system_eigenvalues)
    return Operator(np.diag(np.kron(scale, zeta)), frozenset({"hermitian", "diagonal"}))


def block_lattices(model: MeasurementModel) -> list[tuple[float, float, float]]:
    """Per-block ``(lambda, tau spacing, frequency lattice step)``."""
    g = model.coupling
    dz = model.pointer_grid.spacing
    base = 2.0 * np.pi / model.pointer_grid.period
    return [(lam, dz / abs(g * lam), abs(g * lam) * base) for lam, _ in model.spectrum]


def _as_fraction(x: float) -> Fraction | None:
    # a small denominator bound keeps irrationals from sneaking in as close fractions
    f = Fraction(x).limit_denominator(1000)
    return f if abs(float(f) - x) <= _ALIGN_TOL * max(1.0, abs(x)) else None


def common_translation_step(model: MeasurementModel) -> float:
    """Smallest ``s > 0`` with ``g lambda s`` a multiple of the pointer spacing for all blocks.

    Raises GridAlignmentError when the ratios ``g lambda / spacing`` are not
    commensurate (no common grid-aligned step exists).
    """
    ratios = []
    for lam, _ in model.spectrum:
        r = _as_fraction(abs(model.coupling * lam) / model.pointer_grid.spacing)
        if r is None:
            raise GridAlignmentError(f"no common grid-aligned step: g*lambda/spacing for lambda={lam:g} is not rational")
        ratios.append(r)
    num = reduce(math.gcd, (r.numerator for r in ratios))
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (r.denominator for r in ratios))
    return float(Fraction(den, num))


@lru_cache(maxsize=None)
def _empirical_sign(grid: GridSpec, hbar: float) -> int:
    p = translation_generator(grid, hbar)
    m = time_operator(grid)
    u = propagator(p, grid.spacing, hbar).matrix
    conj = np.real(np.diag(u.conj().T @ m.matrix @ u))
    zeta = grid.coordinates
    plus = np.linalg.norm(conj - wrap_into(zeta + grid.spacing, grid.origin, grid.period))
    minus = np.linalg.norm(conj - wrap_into(zeta - grid.spacing, grid.origin, grid.period))
    return 1 if plus <= minus else -1


def translation_sign(model: MeasurementModel) -> int:
    """Sign ``sigma`` in ``U(s)^dag tau U(s) = tau + sigma s``, fixed on a lambda = 1 block."""
    return _empirical_sign(model.pointer_grid, model.hbar)


@lru_cache(maxsize=64)
def _diagonal_blocks(model: MeasurementModel) -> tuple[Operator, ...]:
    H = build_interaction_hamiltonian(model).matrix
    n = model.pointer_dim
    m = model.system_dim
    blocks = H.reshape(m, n, m, n)
    off = blocks.copy()
    off[np.arange(m), :, np.arange(m), :] = 0
    if np.max(np.abs(off)) > 0:
        raise TQSError("interaction Hamiltonian is not block diagonal over system eigenstates")
    return tuple(Operator(blocks[i, :, i, :], frozenset({"hermitian"})) for i in range(m))


def heisenberg_translation_check(model: MeasurementModel, s: float) -> float:
    """Residual of ``U(s)^dag tau U(s) = tau + sigma s`` over the whole space.

    Each block wraps in its own pointer period.  ``s`` must make every
    ``g lambda s`` an integer number of pointer steps.  ``H`` and ``tau`` are
    both block diagonal over the system eigenbasis, so the full-space
    Frobenius residual is accumulated block by block.
    """
    for lam, _ in model.spectrum:
        if _aligned_steps(model, lam, s) is None:
            raise GridAlignmentError(f"step s={s:g} is not grid aligned for lambda={lam:g}")
    sigma = translation_sign(model)
    grid = model.pointer_grid
    tau = np.real(np.diag(construct_time_operator(model).matrix)).reshape(model.system_dim, -1)
    total = 0.0
    for i, (block, lam) in enumerate(zip(_diagonal_blocks(model), model.system_eigenvalues)):
        glam = model.coupling * lam
        u = propagator(block, s, model.hbar).matrix
        conj = u.conj().T @ np.diag(tau[i]) @ u
        zeta = wrap_into(grid.coordinates + sigma * glam * s, grid.origin, grid.period)
        total += float(np.linalg.norm(conj - np.diag(zeta / glam))) ** 2
    return math.sqrt(total)


def translation_period_steps(model: MeasurementModel) -> int:
    """Number of common steps after which every block has wrapped back to itself."""
    s0 = common_translation_step(model)
    n = model.pointer_dim
    period = 1
    for lam, _ in model.spectrum:
        r = abs(_aligned_steps(model, lam, s0))
        cycle = n // math.gcd(n, r)
        period = period * cycle // math.gcd(period, cycle)
    return period


def interaction_certificate(model: MeasurementModel, tol_spec: float = TOL_SPEC) -> TranslationalCertificate:
    """Lattice certificate for the interaction Hamiltonian.

    The spectrum is read on the symmetric branch of ``U(s0)`` with ``s0`` the
    common translation step.  It passes when all blocks share one frequency
    lattice, i.e. all ``|g lambda|`` coincide.
    """
    step = common_translation_step(model)
    return translational_certificate(build_interaction_hamiltonian(model), model.hbar, branch_step=step, tol_spec=tol_spec)


def factorization_preserved(model: MeasurementModel, tol: float = TOL_ALG) -> bool:
    """Whether every eigenspace of ``tau`` is a product subspace ``V (x) W``.

    ``tau`` itself is always a product of diagonals, but when blocks carry
    different ``g lambda`` a level ``tau = t`` collects pointer positions
    ``g lambda t`` that depend on the block, and its projector then has
    operator-Schmidt rank above one.
    """
    tau = np.real(np.diag(construct_time_operator(model).matrix))
    dims = (model.system_dim, model.pointer_dim)
    for value in np.unique(np.round(tau / tol) * tol):
        mask = np.abs(tau - value) <= tol
        proj = Operator(np.diag(mask.astype(float)), frozenset({"hermitian", "diagonal"}))
        if operator_schmidt_rank(proj, dims, tol) > 1:
            return False
    return True


def admissible_steps(model: MeasurementModel) -> list[float]:
    """Multiples ``m * s0`` of the common step covering one full joint period, both directions.

    Conjugation by ``U(s)`` is periodic in ``m`` with the joint block period,
    so these represent every admissible step.
    """
    s0 = common_translation_step(model)
    p = translation_period_steps(model)
    return [m * s0 for m in range(-p, p + 1)]


def calibration_residuals(model: MeasurementModel, allow_wrap: bool = False) -> list[float]:
    """``|| U(T) |lambda,a>|ready> - |lambda,a>|zeta(lambda)> ||`` for each system basis vector."""
    out = []
    for i in range(model.system_dim):
        e = model.eigenstate(i)
        got = simulate_measurement(model, e, allow_wrap)
        want = calibrated_outcome(model, e, allow_wrap)
        out.append(float(np.linalg.norm(got.amplitudes - want.amplitudes)))
    return out


def random_model(rng: np.random.Generator, max_lambda: int = 4, max_degeneracy: int = 3, max_points: int = 32) -> MeasurementModel:
    """Random integer-spectrum model whose calibrated pointer shifts fit on the grid."""
    k = int(rng.integers(1, 2 * max_lambda + 1))
    choices = [lam for lam in range(-max_lambda, max_lambda + 1) if lam != 0]
    lams = rng.choice(choices, size=min(k, len(choices)), replace=False)
    spectrum = tuple((int(lam), int(rng.integers(1, max_degeneracy + 1))) for lam in sorted(lams))
    lo = min(0, min(lams))
    hi = max(0, max(lams))
    span = hi - lo + 1
    n = int(rng.integers(span, max(span, max_points) + 1))
    spacing = float(rng.choice([0.5, 1.0, 2.0]))
    # g * T * lambda must land on grid points: take g = spacing, T = 1
    origin = lo * spacing
    return MeasurementModel(spectrum, GridSpec(n, spacing, origin), coupling=spacing, duration=1.0)

