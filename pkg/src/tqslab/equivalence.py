"""Unitarily equivalent triples with inequivalent observables.

Two translational Hamiltonians with the same lattice and the same
multiplicity are conjugate by a unitary ``M``, which can also be chosen to
send one anchored state to the other.  Whether the *observables* are carried
across is decided by simultaneous-conjugation invariants: traces of words in
the one-step evolution ``U(dt)`` and the observables.  A single differing word
trace proves that no unitary maps ``(H_1, f_1)`` onto ``(H_2, f_2)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    LatticeMismatchError,
    MultiplicityMismatchError,
    NotTranslationalError,
    TQSError,
)
from .hilbert import (
    TOL_ALG,
    TOL_SPEC,
    Operator,
    StateVector,
    evolve,
    propagator,
    spectral_clusters,
    translational_certificate,
)
from .koopman import DynamicalSystem, KoopmanRep, cycle_system, drift_phase_system, koopman_lift, observable_operator

TOL_GAP = 1e-6

U_FWD = "U"
U_BWD = "U^-1"


class AnchorRelaxedWarning(UserWarning):
    """Trajectory matching was dropped for some eigenspace; only ``H`` is intertwined there."""


@dataclass(frozen=True, eq=False)
class QuantumTriple:
    """Hamiltonian, trajectory (through its initial state) and named observables."""

    hamiltonian: Operator
    initial_state: StateVector
    observables: Mapping[str, Operator] = field(default_factory=dict)
    dt: float = 1.0
    hbar: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not self.hamiltonian.is_hermitian():
            raise TQSError("triple Hamiltonian must be Hermitian")
        if self.initial_state.dim != self.hamiltonian.dim:
            raise DimensionMismatchError("initial state and Hamiltonian dimensions differ")
        obs = dict(self.observables)
        for name, op in obs.items():
            if op.dim != self.hamiltonian.dim:
                raise DimensionMismatchError(f"observable {name!r} has the wrong dimension")
            if not op.is_hermitian():
                raise TQSError(f"observable {name!r} is not Hermitian")
        object.__setattr__(self, "observables", MappingProxyType(obs))

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    def state_at(self, t: float) -> StateVector:
        return evolve(self.hamiltonian, t, self.initial_state, self.hbar)

    def trajectory_residual(self, times: Sequence[float]) -> float:
        """Worst ``|| psi(t + dt) - U(dt) psi(t) ||`` over ``times``."""
        worst = 0.0
        for t in times:
            a = self.state_at(t + self.dt).amplitudes
            b = evolve(self.hamiltonian, self.dt, self.state_at(t), self.hbar).amplitudes
            worst = max(worst, float(np.linalg.norm(a - b)))
        return worst


def triple_from_koopman(rep: KoopmanRep, initial_index: int = 0, name: str = "") -> QuantumTriple:
    """Triple of a Koopman representation, anchored at a basis state, with all properties as observables."""
    obs = {k: observable_operator(rep, k) for k in sorted(rep.dynsys.properties)}
    return QuantumTriple(
        rep.hamiltonian, StateVector.basis(rep.dim, initial_index), obs, rep.dynsys.dt, rep.hbar, name
    )


def multiplicity(H: Operator, hbar: float = 1.0, tol_spec: float = TOL_SPEC) -> int:
    cert = translational_certificate(H, hbar, tol_spec=tol_spec)
    if not cert.passes:
        raise NotTranslationalError(f"Hamiltonian is not translational: {cert.reason}")
    return cert.multiplicity


def _completion(x: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the unit vector ``x``."""
    d = x.size
    q, _ = np.linalg.qr(np.column_stack([x, np.eye(d, dtype=complex)]))
    q = q[:, :d]
    q[:, 0] *= np.vdot(q[:, 0], x)
    return q


def build_intertwiner(
    t1: QuantumTriple,
    t2: QuantumTriple,
    anchor_times: tuple[float, float] = (0.0, 0.0),
    tol_alg: float = TOL_ALG,
    tol_spec: float = TOL_SPEC,
) -> Operator:
    """Unitary ``M`` with ``M H_1 M^dag = H_2`` and ``M psi_1(t_1) = psi_2(t_2)``.

    Eigenspaces are matched lattice point by lattice point; inside each one
    the rotation sends the anchored component of ``psi_1`` to that of
    ``psi_2`` and is completed deterministically.  If an anchor has no
    component in an eigenspace where the other does (or the component norms
    differ), that eigenspace is matched for ``H`` only and an
    :class:`AnchorRelaxedWarning` is emitted.
    """
    if t1.dim != t2.dim:
        raise DimensionMismatchError(f"triples have dims {t1.dim} and {t2.dim}")
    c1 = translational_certificate(t1.hamiltonian, t1.hbar, tol_spec=tol_spec)
    c2 = translational_certificate(t2.hamiltonian, t2.hbar, tol_spec=tol_spec)
    for c, t in ((c1, t1), (c2, t2)):
        if not c.passes:
            raise NotTranslationalError(f"triple {t.name or '?'} is not translational: {c.reason}")
    if c1.multiplicity != c2.multiplicity:
        raise MultiplicityMismatchError(f"multiplicities differ: {c1.multiplicity} vs {c2.multiplicity}")
    if c1.levels != c2.levels or abs(c1.lattice_step * t1.hbar - c2.lattice_step * t2.hbar) > tol_spec:
        raise LatticeMismatchError(
            f"energy lattices differ: step {c1.lattice_step:g} x {c1.levels} vs {c2.lattice_step:g} x {c2.levels}"
        )
    k1 = spectral_clusters(t1.hamiltonian, tol_spec)
    k2 = spectral_clusters(t2.hamiltonian, tol_spec)
    a = t1.state_at(anchor_times[0]).amplitudes
    b = t2.state_at(anchor_times[1]).amplitudes

    m = np.zeros((t1.dim, t1.dim), dtype=complex)
    relaxed = []
    for (e1, b1), (e2, b2) in zip(k1, k2):
        if abs(e1 - e2) > tol_spec:
            raise LatticeMismatchError(f"eigenvalues {e1:g} and {e2:g} do not match")
        ca = b1.conj().T @ a
        cb = b2.conj().T @ b
        na, nb = np.linalg.norm(ca), np.linalg.norm(cb)
        if na > tol_alg and nb > tol_alg:
            w = _completion(cb / nb) @ _completion(ca / na).conj().T
            if abs(na - nb) > tol_alg:
                relaxed.append(e1)
        else:
            w = np.eye(b1.shape[1], dtype=complex)
            if max(na, nb) > tol_alg:
                relaxed.append(e1)
        m += b2 @ w @ b1.conj().T
    if relaxed:
        warnings.warn(
            AnchorRelaxedWarning(
                f"anchored states cannot be matched in {len(relaxed)} eigenspace(s); "
                "trajectory matching relaxed to Hamiltonian-only there"
            ),
            stacklevel=2,
        )
    return Operator(m, frozenset({"unitary"}))


# -- word-trace invariants -------------------------------------------------------


def _rotations(word: tuple[str, ...]):
    return [word[i:] + word[:i] for i in range(len(word))]


def _cancels(word: tuple[str, ...]) -> bool:
    n = len(word)
    if n < 2:
        return False
    return any({word[i], word[(i + 1) % n]} == {U_FWD, U_BWD} for i in range(n))


def enumerate_words(names: Sequence[str], max_len: int) -> list[tuple[str, ...]]:
    """Cyclically reduced words containing at least one observable, one per rotation class."""
    alphabet = (U_FWD, U_BWD) + tuple(names)
    order = {tok: i for i, tok in enumerate(alphabet)}
    out = []
    for n in range(1, max_len + 1):
        for word in itertools.product(alphabet, repeat=n):
            if all(tok in (U_FWD, U_BWD) for tok in word) or _cancels(word):
                continue
            key = [order[t] for t in word]
            if all(key <= [order[t] for t in r] for r in _rotations(word)):
                out.append(word)
    return out


def autocorrelation_word(name: str, lag: int) -> tuple[str, ...]:
    """Word for ``tr(f U^k f U^-k)``."""
    return (name,) + (U_FWD,) * lag + (name,) + (U_BWD,) * lag


def word_trace(word: Sequence[str], letters: Mapping[str, np.ndarray]) -> complex:
    w = np.eye(next(iter(letters.values())).shape[0], dtype=complex)
    for tok in word:
        w = w @ letters[tok]
    return complex(np.trace(w))


def orbit_sum_word_trace(dynsys: DynamicalSystem, word: Sequence[str], values: Mapping[str, Sequence[float]]) -> complex:
    """Trace of a word computed as a sum over basis states, with no matrices.

    ``U`` moves a state forward along the map, ``U^-1`` backward and an
    observable multiplies by its value.  Letters act right to left; a start
    state contributes its accumulated product when the word returns it to
    itself.
    """
    fwd = [int(s) for s in dynsys.step]
    bwd = [0] * len(fwd)
    for s, t in enumerate(fwd):
        bwd[t] = s
    total = 0.0
    for s0 in range(len(fwd)):
        s = s0
        amp = 1.0
        for tok in reversed(word):
            if tok == U_FWD:
                s = fwd[s]
            elif tok == U_BWD:
                s = bwd[s]
            else:
                amp *= float(values[tok][s])
        if s == s0:
            total += amp
    return complex(total)


@dataclass(frozen=True)
class WordTrace:
    word: str
    value1: complex
    value2: complex
    gap: float
    letters: tuple[str, ...] = ()


@dataclass(frozen=True)
class InequivalenceCertificate:
    triple_match_residual: float
    hamiltonian_residual: float
    trajectory_residual: float
    observable_distances: Mapping[str, float]
    word_traces: tuple[WordTrace, ...]
    tol_alg: float = TOL_ALG
    tol_gap: float = TOL_GAP

    @property
    def invariant_mismatches(self) -> tuple[WordTrace, ...]:
        return tuple(w for w in self.word_traces if w.gap > self.tol_gap)

    @property
    def max_gap(self) -> float:
        return max((w.gap for w in self.word_traces), default=0.0)

    @property
    def valid(self) -> bool:
        """Same triple (within tol_alg) but at least one structural invariant gap."""
        return self.triple_match_residual <= self.tol_alg and bool(self.invariant_mismatches)


def _paired_names(t1: QuantumTriple, t2: QuantumTriple) -> list[str]:
    if len(t1.observables) != len(t2.observables):
        raise TQSError("observable lists have different lengths; pairing is undefined")
    if set(t1.observables) != set(t2.observables):
        raise TQSError(f"observables are paired by name but differ: {sorted(t1.observables)} vs {sorted(t2.observables)}")
    return sorted(t1.observables)


def inequivalence_report(
    t1: QuantumTriple,
    t2: QuantumTriple,
    M: Operator,
    max_word_len: int = 4,
    *,
    anchor_times: tuple[float, float] = (0.0, 0.0),
    max_lag: int | None = None,
    tol_alg: float = TOL_ALG,
    tol_gap: float = TOL_GAP,
) -> InequivalenceCertificate:
    """Check how far ``M`` carries the triple and the observables across.

    Word traces use ``U(dt)``, ``U(-dt)`` and the paired observables; words up
    to ``max_word_len`` are enumerated once per cyclic rotation, and the
    autocorrelations ``tr(f U^k f U^-k)`` are added for ``k = 1 .. max_lag``
    (default ``max_word_len``).
    """
    names = _paired_names(t1, t2)
    if M.dim != t1.dim or t1.dim != t2.dim:
        raise DimensionMismatchError("intertwiner and triples must share one dimension")
    if abs(t1.dt - t2.dt) > 1e-12 * max(t1.dt, t2.dt):
        raise TQSError("triples must share the time step dt for word traces")
    m = M.matrix
    md = m.conj().T
    h_res = float(np.linalg.norm(m @ t1.hamiltonian.matrix @ md - t2.hamiltonian.matrix))
    a = t1.state_at(anchor_times[0]).amplitudes
    b = t2.state_at(anchor_times[1]).amplitudes
    traj = float(np.linalg.norm(m @ a - b))
    dists = {
        k: float(np.linalg.norm(m @ t1.observables[k].matrix @ md - t2.observables[k].matrix)) for k in names
    }

    u1 = propagator(t1.hamiltonian, t1.dt, t1.hbar).matrix
    u2 = propagator(t2.hamiltonian, t2.dt, t2.hbar).matrix
    letters1 = {U_FWD: u1, U_BWD: u1.conj().T, **{k: t1.observables[k].matrix for k in names}}
    letters2 = {U_FWD: u2, U_BWD: u2.conj().T, **{k: t2.observables[k].matrix for k in names}}

    words = enumerate_words(names, max_word_len) if names else []
    lags = max_word_len if max_lag is None else max_lag
    for k in names:
        for lag in range(1, lags + 1):
            w = autocorrelation_word(k, lag)
            if w not in words:
                words.append(w)
    traces = []
    for w in words:
        v1 = word_trace(w, letters1)
        v2 = word_trace(w, letters2)
        traces.append(WordTrace(" ".join(w), v1, v2, float(abs(v1 - v2)), tuple(w)))
    return InequivalenceCertificate(
        triple_match_residual=max(h_res, traj),
        hamiltonian_residual=h_res,
        trajectory_residual=traj,
        observable_distances=MappingProxyType(dists),
        word_traces=tuple(traces),
        tol_alg=tol_alg,
        tol_gap=tol_gap,
    )


def gap_implied_bound(cert: InequivalenceCertificate, t1: QuantumTriple, t2: QuantumTriple) -> float:
    """Lower bound on ``max_k ||W f1_k W^dag - f2_k||_2`` for any ``W`` with ``W U1 W^dag = U2``.

    For a word with ``r`` observable letters, ``|tr w_1 - tr w_2| <= dim * r *
    eps * F**(r - 1)`` where ``F`` bounds the observable norms, so each gap
    gives ``eps >= gap / (dim * r * F**(r - 1))``.
    """
    norms = [np.linalg.norm(op.matrix, 2) for t in (t1, t2) for op in t.observables.values()]
    F = max(max(norms, default=1.0), 1.0)
    best = 0.0
    for w in cert.invariant_mismatches:
        r = sum(1 for tok in w.letters if tok not in (U_FWD, U_BWD))
        if r:
            best = max(best, w.gap / (t1.dim * r * F ** (r - 1)))
    return best


def haar_commutant_search(
    t1: QuantumTriple,
    t2: QuantumTriple,
    M: Operator,
    n_samples: int,
    rng: np.random.Generator,
    tol_spec: float = TOL_SPEC,
) -> float:
    """Smallest max paired-observable distance over random Hamiltonian-preserving unitaries.

    Samples ``W = M Q`` with ``Q`` Haar random inside every eigenspace of
    ``H_1``, so ``W`` intertwines the Hamiltonians; distances are spectral norms.
    """
    from scipy.stats import unitary_group

    names = _paired_names(t1, t2)
    clusters = spectral_clusters(t1.hamiltonian, tol_spec)
    best = math.inf
    for _ in range(n_samples):
        q = np.zeros((t1.dim, t1.dim), dtype=complex)
        for _, basis in clusters:
            d = basis.shape[1]
            r = unitary_group.rvs(d, random_state=rng) if d > 1 else np.exp(2j * np.pi * rng.random()) * np.eye(1)
            q += basis @ r @ basis.conj().T
        w = M.matrix @ q
        wd = w.conj().T
        dist = max(
            np.linalg.norm(w @ t1.observables[k].matrix @ wd - t2.observables[k].matrix, 2) for k in names
        )
        best = min(best, float(dist))
    return best


# -- showcase pairs ----------------------------------------------------------------


def cycle_pair(n: int = 8, dt: float = 1.0) -> tuple[QuantumTriple, QuantumTriple]:
    """Two ``n``-cycles observed through ``f(s) = s`` and ``f(s) = s**2 mod n``."""
    s = np.arange(n)
    d1 = cycle_system([n], dt, {"f": s.astype(float)})
    d2 = cycle_system([n], dt, {"f": ((s * s) % n).astype(float)})
    return (
        triple_from_koopman(koopman_lift(d1), 0, "linear"),
        triple_from_koopman(koopman_lift(d2), 0, "quadratic"),
    )


def phase_grid_pair(dt: float = 1.0) -> tuple[QuantumTriple, QuantumTriple]:
    """Drift on an 8 x 8 phase grid versus a 4 x 16 grid: 8 orbits of length 8 each."""
    d1 = drift_phase_system(8, 8, 0, dt)
    d2 = drift_phase_system(4, 16, 8, dt)
    return (
        triple_from_koopman(koopman_lift(d1), 0, "grid8x8"),
        triple_from_koopman(koopman_lift(d2), 0, "grid4x16"),
    )
