"""Koopman quantum representation of finite reversible dynamical systems.

States of the dynamical system become the canonical basis ``|s>``; one time
step ``dt`` of the dynamics becomes the permutation ``U(dt)|s> = |alpha(s)>``.
On each orbit of length ``L`` the Hamiltonian is the cyclic translation
generator with time spacing ``dt``, so ``exp(-i dt H / hbar)`` reproduces the
permutation exactly.  Properties ``f: S -> R`` become diagonal operators.

Every finite bijection is periodic.  The hypothesis "no time loops" is read
as "the orbit period is not shorter than the simulation horizon": one cycle
of each orbit plays the role of a window onto the real line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    GridFactorizationError,
    NonBijectiveError,
    OrbitLengthError,
    TQSError,
)
from .hilbert import (
    TOL_ALG,
    TOL_SPEC,
    GridSpec,
    Operator,
    StateVector,
    TranslationalCertificate,
    propagator,
    translation_generator,
    translational_certificate,
    weyl_translation_check,
)


@dataclass(frozen=True, eq=False)
class DynamicalSystem:
    """Finite deterministic reversible dynamics.

    Parameters
    ----------
    step : sequence of int
        ``step[s]`` is the state reached from ``s`` after one time step.
        Must be a bijection of ``range(len(step))``.
    dt : float
        Duration of one step.
    weights : sequence of float, optional
        Measure ``mu_s > 0`` of each state; uniform if omitted.  The step must
        preserve it.
    properties : mapping of str to sequence of float
        Named real-valued functions on the states.
    shape : (int, int), optional
        Presentation of the states as a row-major ``(n_q, n_p)`` phase grid.
    """

    step: tuple[int, ...]
    dt: float = 1.0
    weights: tuple[float, ...] | None = None
    properties: Mapping[str, np.ndarray] = field(default_factory=dict)
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        step = np.asarray(self.step)
        if step.ndim != 1 or step.size < 1 or not np.issubdtype(step.dtype, np.integer):
            raise NonBijectiveError("step must be a non-empty sequence of integer state indices")
        n = step.size
        if not np.array_equal(np.sort(step), np.arange(n)):
            raise NonBijectiveError("step map is not a bijection of the state set")
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise TQSError("dt must be a finite positive real")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,) or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise TQSError("weights must be one positive finite number per state")
        if np.max(np.abs(w[step] - w)) > 1e-12 * np.max(w):
            raise TQSError("step map does not preserve the measure")
        props = {}
        for name, values in dict(self.properties).items():
            v = np.asarray(values, dtype=float)
            if v.shape != (n,) or not np.all(np.isfinite(v)):
                raise TQSError(f"property {name!r} must give one finite real per state")
            v.setflags(write=False)
            props[str(name)] = v
        if self.shape is not None:
            nq, npp = (int(x) for x in self.shape)
            if nq < 1 or npp < 1 or nq * npp != n:
                raise GridFactorizationError(f"shape {self.shape} does not factor {n} states")
            object.__setattr__(self, "shape", (nq, npp))
        step = step.astype(int)
        step.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "properties", MappingProxyType(props))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def size(self) -> int:
        return self.step.size

    @cached_property
    def inverse_step(self) -> np.ndarray:
        inv = np.empty_like(self.step)
        inv[self.step] = np.arange(self.size)
        return inv

    def iterate(self, s: int, k: int) -> int:
        """``alpha^k(s)`` for any integer ``k``."""
        m = self.step if k >= 0 else self.inverse_step
        for _ in range(abs(k)):
            s = int(m[s])
        return s


def orbit_decomposition(step: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    """Cycles of a permutation, each listed from its smallest member along the map.

    Orbits are ordered by smallest member.
    """
    step = np.asarray(step)
    seen = np.zeros(step.size, dtype=bool)
    orbits = []
    for s0 in range(step.size):
        if seen[s0]:
            continue
        cyc = []
        s = s0
        while not seen[s]:
            seen[s] = True
            cyc.append(s)
            s = int(step[s])
        orbits.append(tuple(cyc))
    return tuple(orbits)


@dataclass(frozen=True)
class Orbit:
    id: int
    length: int
    members: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class KoopmanRep:
    dynsys: DynamicalSystem
    step_unitary: Operator
    hamiltonian: Operator
    orbits: tuple[Orbit, ...]
    hbar: float = 1.0

    @property
    def dim(self) -> int:
        return self.dynsys.size

    @property
    def orbit_lengths(self) -> tuple[int, ...]:
        return tuple(o.length for o in self.orbits)


def koopman_lift(dynsys: DynamicalSystem, hbar: float = 1.0) -> KoopmanRep:
    """Build the permutation unitary and its orbitwise translation generator."""
    n = dynsys.size
    p = np.zeros((n, n))
    p[dynsys.step, np.arange(n)] = 1.0
    u = Operator(p, frozenset({"unitary", "permutation"}))

    h = np.zeros((n, n), dtype=complex)
    energies = np.zeros(n)
    vecs = np.zeros((n, n), dtype=complex)
    orbits = []
    col = 0
    for i, members in enumerate(orbit_decomposition(dynsys.step)):
        L = len(members)
        block = translation_generator(GridSpec(L, dynsys.dt), hbar)
        idx = np.asarray(members)
        h[np.ix_(idx, idx)] = block.matrix
        w, v = block.eigh
        energies[col:col + L] = w
        vecs[idx, col:col + L] = v
        col += L
        orbits.append(Orbit(i, L, tuple(int(s) for s in members)))
    H = Operator(h, frozenset({"hermitian"}))
    order = np.argsort(energies, kind="stable")
    H.__dict__["eigh"] = (energies[order], vecs[:, order])
    return KoopmanRep(dynsys, u, H, tuple(orbits), hbar)


def observable_operator(rep: KoopmanRep, f: str | Sequence[float] | Callable[[int], float]) -> Operator:
    """Diagonal operator ``sum_s f(s) |s><s|``.

    ``f`` may be the name of a property of the dynamical system, an array of
    values, or a callable on state indices.  The measure stays in the inner
    product; the operator is literally diagonal.
    """
    if isinstance(f, str):
        try:
            values = rep.dynsys.properties[f]
        except KeyError:
            raise TQSError(f"unknown property {f!r}") from None
    elif callable(f):
        values = np.array([f(s) for s in range(rep.dim)], dtype=float)
    else:
        values = np.asarray(f, dtype=float)
    if values.shape != (rep.dim,):
        raise TQSError("property must give one value per state")
    return Operator(np.diag(values), frozenset({"hermitian", "diagonal"}))


def exponential_consistency(rep: KoopmanRep) -> float:
    """``max |exp(-i dt H / hbar) - P|`` entrywise."""
    u = propagator(rep.hamiltonian, rep.dynsys.dt, rep.hbar).matrix
    return float(np.max(np.abs(u - rep.step_unitary.matrix)))


@dataclass(frozen=True)
class Theorem3Result:
    certificate: TranslationalCertificate
    basis_preserved: bool
    orbit_length: int
    orbit_count: int
    power_residual: float
    dt: float = 1.0

    @property
    def horizon(self) -> float:
        """Loop-free time window: one orbit period."""
        return self.orbit_length * self.dt


def power_residuals(rep: KoopmanRep, max_power: int | None = None) -> np.ndarray:
    """``max |U(k dt) - P^k|`` for ``k = 0 .. max_power - 1`` (default: longest orbit).

    ``U(k dt)`` is evaluated from the Hamiltonian for every ``k``, not by
    repeated multiplication.
    """
    K = max(rep.orbit_lengths) if max_power is None else max_power
    n = rep.dim
    idx = np.arange(n)
    out = np.empty(K)
    target = np.arange(n)
    for k in range(K):
        u = propagator(rep.hamiltonian, k * rep.dynsys.dt, rep.hbar).matrix
        pk = np.zeros((n, n))
        pk[target, idx] = 1.0
        out[k] = np.max(np.abs(u - pk))
        target = rep.dynsys.step[target]
    return out


def theorem3_certificate(rep: KoopmanRep, tol_alg: float = TOL_ALG, tol_spec: float = TOL_SPEC) -> Theorem3Result:
    """Lattice certificate plus the basis-preservation check.

    Raises OrbitLengthError if the orbits do not all have the same length;
    per-orbit lattices are then listed in the error.
    """
    lengths = rep.orbit_lengths
    if len(set(lengths)) != 1:
        steps = sorted({2 * np.pi / (L * rep.dynsys.dt) for L in lengths})
        raise OrbitLengthError(
            f"orbit lengths differ {sorted(set(lengths))}; per-orbit lattice steps {[round(s, 6) for s in steps]}",
            lengths=lengths,
        )
    cert = translational_certificate(rep.hamiltonian, rep.hbar, tol_spec=tol_spec)
    res = power_residuals(rep)
    return Theorem3Result(
        certificate=cert,
        basis_preserved=bool(np.max(res) <= tol_alg),
        orbit_length=lengths[0],
        orbit_count=len(lengths),
        power_residual=float(np.max(res)),
        dt=rep.dynsys.dt,
    )


@dataclass(frozen=True)
class CCRReport:
    """Commuting multiplication operators versus the Weyl-conjugate shift generator."""

    commutator_qp: float
    weyl_residual: float
    weyl_shift: float
    infinitesimal_defect: float
    generator_support: int
    observable_support: int
    trace_bound: float


def phase_grid_operators(rep: KoopmanRep, q_grid: GridSpec, p_grid: GridSpec) -> tuple[Operator, Operator, Operator]:
    """``(q, p, D_q)`` on a row-major ``n_q x n_p`` presentation of the states."""
    nq, npp = q_grid.n_points, p_grid.n_points
    if nq * npp != rep.dim:
        raise GridFactorizationError(f"{nq} x {npp} phase grid does not match {rep.dim} states")
    if rep.dynsys.shape is not None and rep.dynsys.shape != (nq, npp):
        raise GridFactorizationError(f"system is presented as {rep.dynsys.shape}, not {(nq, npp)}")
    q = Operator(np.diag(np.kron(q_grid.coordinates, np.ones(npp))), frozenset({"hermitian", "diagonal"}))
    p = Operator(np.diag(np.kron(np.ones(nq), p_grid.coordinates)), frozenset({"hermitian", "diagonal"}))
    dq = translation_generator(q_grid, rep.hbar)
    d = Operator(np.kron(dq.matrix, np.eye(npp)), frozenset({"hermitian"}))
    return q, p, d


def ccr_dichotomy_report(rep: KoopmanRep, q_grid: GridSpec, p_grid: GridSpec, tol_alg: float = TOL_ALG) -> CCRReport:
    """Compare ``[q, p] = 0`` with the Weyl relation of ``q`` and the shift generator ``D_q``.

    ``infinitesimal_defect`` is the spectral norm of ``[q, D_q] - i hbar I``;
    it cannot vanish because the trace of a commutator is zero, and is at
    least ``hbar`` (``trace_bound``).
    """
    q, p, d = phase_grid_operators(rep, q_grid, p_grid)
    comm = q.matrix @ p.matrix - p.matrix @ q.matrix
    a = q_grid.spacing
    weyl = weyl_translation_check(q, d, a, rep.hbar, q_grid.period, origin=q_grid.origin)
    ccr = q.matrix @ d.matrix - d.matrix @ q.matrix - 1j * rep.hbar * np.eye(rep.dim)
    # a basis state where q is nonzero, so the diagonal action is visible
    s = int(np.argmax(np.abs(np.diag(q.matrix))))
    delta = StateVector.basis(rep.dim, s).amplitudes
    gen = d.matrix @ delta
    obs = q.matrix @ delta
    return CCRReport(
        commutator_qp=float(np.max(np.abs(comm))),
        weyl_residual=weyl,
        weyl_shift=a,
        infinitesimal_defect=float(np.linalg.norm(ccr, 2)),
        generator_support=int(np.sum(np.abs(gen) > tol_alg)),
        observable_support=int(np.sum(np.abs(obs) > tol_alg)),
        trace_bound=rep.hbar,
    )


# -- system builders -------------------------------------------------------------


def cycle_system(lengths: Sequence[int], dt: float = 1.0, properties: Mapping[str, Sequence[float]] | None = None) -> DynamicalSystem:
    """Disjoint cycles on consecutive state indices, each advancing by one."""
    step = []
    start = 0
    for L in lengths:
        if L < 1:
            raise TQSError("cycle lengths must be positive")
        step.extend(start + (j + 1) % L for j in range(L))
        start += L
    return DynamicalSystem(tuple(step), dt, properties=properties or {})


def relabeled(dynsys: DynamicalSystem, perm: Sequence[int]) -> DynamicalSystem:
    """Same dynamics with state ``s`` renamed ``perm[s]``."""
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    step = perm[dynsys.step[inv]]
    props = {k: v[inv] for k, v in dynsys.properties.items()}
    return DynamicalSystem(tuple(int(s) for s in step), dynsys.dt, dynsys.weights[inv], props)


def random_equal_orbit_system(rng: np.random.Generator, n_orbits: int, length: int, dt: float = 1.0) -> DynamicalSystem:
    """Random bijection on ``n_orbits * length`` states with all orbits of one length."""
    n = n_orbits * length
    labels = rng.permutation(n)
    step = np.empty(n, dtype=int)
    for o in range(n_orbits):
        cyc = labels[o * length:(o + 1) * length]
        step[cyc] = np.roll(cyc, -1)
    props = {"position": np.asarray(rng.normal(size=n))}
    return DynamicalSystem(tuple(int(s) for s in step), dt, properties=props)


def drift_phase_system(n_q: int, n_p: int, wrap_shift: int = 0, dt: float = 1.0) -> DynamicalSystem:
    """Uniform drift ``q -> q + 1`` on a row-major ``n_q x n_p`` grid.

    When ``q`` wraps around, ``p`` advances by ``wrap_shift`` (mod ``n_p``), which
    lengthens the orbits to ``n_q * n_p / gcd(n_p, wrap_shift)``.  Properties
    ``q`` and ``p`` hold the grid coordinates.
    """
    n = n_q * n_p
    iq, ip = np.divmod(np.arange(n), n_p)
    nq_next = (iq + 1) % n_q
    np_next = (ip + np.where(iq == n_q - 1, wrap_shift, 0)) % n_p
    step = nq_next * n_p + np_next
    return DynamicalSystem(
        tuple(int(s) for s in step), dt, properties={"q": iq.astype(float), "p": ip.astype(float)}, shape=(n_q, n_p)
    )
