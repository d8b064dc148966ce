"""Finite-dimensional core: grids, operators, states and the translation generator.

The continuum Hamiltonian ``-i hbar d/dtau`` is realized on an ``n``-point
cyclic grid.  Its finite stand-in is the symmetric-branch logarithm of the
one-step cyclic shift, so that ``exp(-i * spacing * H / hbar)`` is *exactly*
the shift permutation.  The infinitesimal commutation relation cannot hold in
finite dimension (the trace of a commutator vanishes), so canonical
conjugacy is always checked in exponentiated (Weyl) form.

All objects are immutable; all functions are pure, apart from the optional
evolution hooks used for instrumentation.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    FlagViolationError,
    NotHermitianError,
    TQSError,
)

__all__ = [
    "TOL_ALG",
    "TOL_SPEC",
    "GridSpec",
    "Operator",
    "StateVector",
    "TranslationalCertificate",
    "EvolutionRecord",
    "translation_generator",
    "time_operator",
    "evolve",
    "propagator",
    "weyl_translation_check",
    "translational_certificate",
    "spectral_clusters",
    "branch_generator",
    "fold_frequencies",
    "operator_schmidt_rank",
    "kron",
    "kronecker_sum",
    "identity",
    "diagonal_operator",
    "shift_permutation",
    "add_evolution_hook",
    "remove_evolution_hook",
    "recording_evolutions",
]

TOL_ALG = 1e-10
TOL_SPEC = 1e-8

FLAGS = frozenset({"hermitian", "unitary", "diagonal", "permutation"})


def _is_real_number(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


@dataclass(frozen=True)
class GridSpec:
    """Uniform cyclic grid ``origin + k * spacing``, ``k = 0 .. n_points - 1``."""

    n_points: int
    spacing: float = 1.0
    origin: float = 0.0

    def __post_init__(self):
        n = self.n_points
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise TQSError(f"grid n_points must be a positive integer, got {n!r}")
        if not _is_real_number(self.spacing) or not math.isfinite(self.spacing) or self.spacing <= 0:
            raise TQSError(f"grid spacing must be a finite real > 0, got {self.spacing!r}")
        if not _is_real_number(self.origin) or not math.isfinite(self.origin):
            raise TQSError(f"grid origin must be a finite real, got {self.origin!r}")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", float(self.origin))

    @property
    def period(self) -> float:
        return self.n_points * self.spacing

    @property
    def coordinates(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n_points)

    def index_of(self, x: float, tol: float = 1e-9) -> int | None:
        """Index of the grid point at coordinate ``x`` (no wrapping), or None."""
        k = (x - self.origin) / self.spacing
        kr = round(k)
        if abs(k - kr) > tol or not 0 <= kr < self.n_points:
            return None
        return int(kr)

    def wrap(self, x):
        """Reduce coordinates into ``[origin, origin + period)``."""
        return wrap_into(x, self.origin, self.period)


def wrap_into(x, origin: float, period: float):
    y = origin + np.mod(np.asarray(x, dtype=float) - origin, period)
    # mod can land a hair below the upper edge for values that are exact wraps
    y = np.where(np.abs(y - (origin + period)) <= 1e-9 * period, origin, y)
    return y


def _entry_tol(m: np.ndarray, tol: float) -> float:
    return tol * max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)


def _check_flag(flag: str, m: np.ndarray, tol: float) -> bool:
    n = m.shape[0]
    if flag == "hermitian":
        return float(np.max(np.abs(m - m.conj().T))) <= _entry_tol(m, tol)
    if flag == "unitary":
        return float(np.max(np.abs(m.conj().T @ m - np.eye(n)))) <= tol * max(1.0, math.sqrt(n))
    if flag == "diagonal":
        off = m - np.diag(np.diag(m))
        return float(np.max(np.abs(off))) <= _entry_tol(m, tol)
    if flag == "permutation":
        if not np.all(np.isclose(m, 0, atol=tol) | np.isclose(m, 1, atol=tol)):
            return False
        ones = np.isclose(m, 1, atol=tol)
        return bool(np.all(ones.sum(axis=0) == 1) and np.all(ones.sum(axis=1) == 1))
    raise TQSError(f"unknown operator flag {flag!r}")


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex square matrix with verified structure flags.

    Every flag in ``flags`` (a subset of ``{"hermitian", "unitary",
    "diagonal", "permutation"}``) is checked numerically at construction.
    The matrix is copied and made read-only.
    """

    matrix: np.ndarray
    flags: frozenset = frozenset()

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionMismatchError(f"operator must be a non-empty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise TQSError("operator has non-finite entries")
        flags = frozenset(self.flags)
        unknown = flags - FLAGS
        if unknown:
            raise TQSError(f"unknown operator flags {sorted(unknown)}")
        for flag in sorted(flags):
            if not _check_flag(flag, m, TOL_ALG):
                raise FlagViolationError(f"operator declared {flag} but is not (tol {TOL_ALG:g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "flags", flags)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = TOL_ALG) -> bool:
        return "hermitian" in self.flags or _check_flag("hermitian", self.matrix, tol)

    def is_diagonal(self, tol: float = TOL_ALG) -> bool:
        return "diagonal" in self.flags or _check_flag("diagonal", self.matrix, tol)

    def adjoint(self) -> Operator:
        return Operator(self.matrix.conj().T, self.flags)

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and orthonormal eigenvectors (Hermitian part)."""
        m = self.matrix
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        return w, v

    def expectation(self, psi: StateVector) -> float:
        a = psi.amplitudes
        return float(np.real(np.vdot(a, self.matrix @ a)))


def identity(n: int) -> Operator:
    return Operator(np.eye(n), FLAGS)


def diagonal_operator(values: Sequence[float]) -> Operator:
    values = np.asarray(values)
    flags = {"diagonal"}
    if np.all(np.isreal(values)):
        flags.add("hermitian")
    return Operator(np.diag(values), frozenset(flags))


def kron(*ops: Operator) -> Operator:
    """Kronecker product; flags common to all factors are kept."""
    if not ops:
        raise TQSError("kron needs at least one operator")
    m = ops[0].matrix
    flags = set(ops[0].flags)
    for op in ops[1:]:
        m = np.kron(m, op.matrix)
        flags &= op.flags
    return Operator(m, frozenset(flags))


def kronecker_sum(a: Operator, b: Operator) -> Operator:
    """``a (x) I + I (x) b``."""
    m = np.kron(a.matrix, np.eye(b.dim)) + np.kron(np.eye(a.dim), b.matrix)
    flags = a.flags & b.flags & {"hermitian", "diagonal"}
    return Operator(m, flags)


def shift_permutation(n: int, steps: int = 1) -> np.ndarray:
    """Matrix sending basis vector ``e_j`` to ``e_{(j + steps) mod n}``."""
    p = np.zeros((n, n))
    j = np.arange(n)
    p[(j + steps) % n, j] = 1.0
    return p


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitude vector.

    Unit norm is enforced unless ``normalized=False``, which is reserved for
    history-summed aggregates such as the Page-Wootters vector.
    """

    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if a.size < 1:
            raise DimensionMismatchError("state vector must be non-empty")
        if self.normalized and abs(np.linalg.norm(a) - 1.0) > TOL_ALG:
            raise TQSError(f"state vector is not normalized (norm {np.linalg.norm(a)!r})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def basis(cls, dim: int, index: int) -> StateVector:
        a = np.zeros(dim, dtype=complex)
        a[index] = 1.0
        return cls(a)

    @classmethod
    def uniform(cls, dim: int) -> StateVector:
        return cls(np.full(dim, 1.0 / math.sqrt(dim), dtype=complex))

    @classmethod
    def normalize(cls, amplitudes) -> StateVector:
        a = np.asarray(amplitudes, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(a)
        if nrm == 0:
            raise TQSError("cannot normalize the zero vector")
        return cls(a / nrm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self, other: StateVector) -> StateVector:
        return StateVector(np.kron(self.amplitudes, other.amplitudes), self.normalized and other.normalized)

    def inner(self, other: StateVector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


# -- instrumentation ---------------------------------------------------------


@dataclass(frozen=True)
class EvolutionRecord:
    """One unitary evolution as seen by the hooks.

    For ``kind == "state"`` the drifts are relative changes of the norm and of
    the energy expectation of the evolved vector.  For ``kind ==
    "propagator"`` they are ``max|U^dag U - I|`` and ``max|U^dag H U - H|``,
    which bound the drift for every state at once.
    """

    kind: str
    dim: int
    time: float
    norm_drift: float
    energy_drift: float


_hooks: list[Callable[[EvolutionRecord], None]] = []
_hooks_lock = threading.Lock()


def add_evolution_hook(fn: Callable[[EvolutionRecord], None]) -> None:
    with _hooks_lock:
        _hooks.append(fn)


def remove_evolution_hook(fn: Callable[[EvolutionRecord], None]) -> None:
    with _hooks_lock:
        _hooks.remove(fn)


@contextmanager
def recording_evolutions() -> Iterator[list[EvolutionRecord]]:
    """Collect an :class:`EvolutionRecord` for every evolution in the block."""
    records: list[EvolutionRecord] = []
    lock = threading.Lock()

    def hook(rec):
        with lock:
            records.append(rec)

    add_evolution_hook(hook)
    try:
        yield records
    finally:
        remove_evolution_hook(hook)


def _active_hooks():
    with _hooks_lock:
        return list(_hooks)


def _notify_state(hooks, H: Operator, t: float, before: np.ndarray, after: np.ndarray) -> None:
    n0 = np.linalg.norm(before)
    n1 = np.linalg.norm(after)
    e0 = np.real(np.vdot(before, H.matrix @ before)) / n0**2
    e1 = np.real(np.vdot(after, H.matrix @ after)) / n0**2
    rec = EvolutionRecord("state", H.dim, float(t), float(abs(n1 - n0) / n0), float(abs(e1 - e0)))
    for fn in hooks:
        fn(rec)


def _notify_propagator(hooks, H: Operator, t: float, u: np.ndarray) -> None:
    ud = u.conj().T
    norm_drift = float(np.max(np.abs(ud @ u - np.eye(H.dim))))
    energy_drift = float(np.max(np.abs(ud @ H.matrix @ u - H.matrix)))
    rec = EvolutionRecord("propagator", H.dim, float(t), norm_drift, energy_drift)
    for fn in hooks:
        fn(rec)


# -- evolution -----------------------------------------------------------------


def _require_hermitian(H: Operator, tol: float = TOL_ALG) -> None:
    if not H.is_hermitian(tol):
        raise NotHermitianError("Hamiltonian must be Hermitian")


def evolve(H: Operator, t: float, psi: StateVector, hbar: float = 1.0) -> StateVector:
    """Return ``exp(-i t H / hbar) psi``.

    Raises
    ------
    NotHermitianError
        If ``H`` is not Hermitian.
    DimensionMismatchError
        If ``psi`` does not live on the space of ``H``.
    """
    _require_hermitian(H)
    if psi.dim != H.dim:
        raise DimensionMismatchError(f"state has dim {psi.dim}, operator has dim {H.dim}")
    hooks = _active_hooks()
    if t == 0:
        out = psi.amplitudes
    else:
        w, v = H.eigh
        out = v @ (np.exp(-1j * (t / hbar) * w) * (v.conj().T @ psi.amplitudes))
    if hooks:
        _notify_state(hooks, H, t, psi.amplitudes, out)
    if out is psi.amplitudes:
        return psi
    return StateVector(out, normalized=psi.normalized)


def propagator(H: Operator, t: float, hbar: float = 1.0) -> Operator:
    """The evolution operator ``exp(-i t H / hbar)`` as a unitary Operator."""
    _require_hermitian(H)
    if t == 0:
        u = np.eye(H.dim, dtype=complex)
    else:
        w, v = H.eigh
        u = (v * np.exp(-1j * (t / hbar) * w)) @ v.conj().T
    hooks = _active_hooks()
    if hooks:
        _notify_propagator(hooks, H, t, u)
    return Operator(u, frozenset({"unitary"}))


# -- the translation generator ------------------------------------------------


def _symmetric_integers(n: int) -> np.ndarray:
    # ceil(-n/2) .. ceil(n/2) - 1
    return np.arange(-(n // 2), n - n // 2)


def translation_generator(grid: GridSpec, hbar: float = 1.0) -> Operator:
    """Finite stand-in for ``-i hbar d/dtau`` on a cyclic grid.

    ``H = F diag(hbar * omega_k) F^dag`` with ``F[j, k] = exp(2 pi i j k / n) / sqrt(n)``
    and ``omega_k = 2 pi k / (n * spacing)`` for ``k`` in the symmetric range
    ``ceil(-n/2) .. ceil(n/2) - 1``.  With this branch,
    ``exp(-i * spacing * H / hbar)`` maps ``e_j`` to ``e_{j+1 mod n}``.
    """
    if hbar <= 0:
        raise TQSError("hbar must be positive")
    n = grid.n_points
    k = _symmetric_integers(n)
    omega = 2.0 * np.pi * k / grid.period
    f = np.exp(2j * np.pi * np.outer(np.arange(n), k) / n) / math.sqrt(n)
    energies = hbar * omega
    h = (f * energies) @ f.conj().T
    h = 0.5 * (h + h.conj().T)
    op = Operator(h, frozenset({"hermitian"}))
    # the exact eigenpairs are known; seed the cache so evolution is exact to roundoff
    op.__dict__["eigh"] = (energies, f)
    return op


def time_operator(grid: GridSpec) -> Operator:
    """Diagonal position/time operator ``diag(origin + k * spacing)``."""
    return Operator(np.diag(grid.coordinates), frozenset({"hermitian", "diagonal"}))


def weyl_translation_check(
    A: Operator,
    H: Operator,
    s: float,
    hbar: float = 1.0,
    period: float | None = None,
    *,
    origin: float | None = None,
) -> float:
    """Residual of the Weyl relation ``U(s)^dag A U(s) = A + s (mod period)``.

    ``A`` must be Hermitian and diagonal; its diagonal is wrapped into
    ``[origin, origin + period)`` after the shift.  ``origin`` defaults to the
    smallest diagonal entry.  The residual is a Frobenius norm.
    """
    _require_hermitian(A)
    _require_hermitian(H)
    if not A.is_diagonal():
        raise TQSError("weyl_translation_check needs a diagonal A")
    if A.dim != H.dim:
        raise DimensionMismatchError(f"A has dim {A.dim}, H has dim {H.dim}")
    if period is None or period <= 0:
        raise TQSError("a positive period is required")
    diag = np.real(np.diag(A.matrix))
    if origin is None:
        origin = float(diag.min())
    u = propagator(H, s, hbar).matrix
    conj = u.conj().T @ A.matrix @ u
    target = wrap_into(diag + s, origin, period)
    return float(np.linalg.norm(conj - np.diag(target)))


# -- spectral certificates -------------------------------------------------------


@dataclass(frozen=True)
class TranslationalCertificate:
    """Finite-scale verdict that ``H`` has the form ``-i hbar d/dtau``.

    ``passes`` means the sorted spectrum equals ``hbar * lattice_step * k`` for
    ``k`` in a contiguous symmetric integer range, each value with the same
    multiplicity ``multiplicity``, within ``tol_spec``.
    """

    passes: bool
    lattice_step: float
    multiplicity: int
    max_residual: float
    levels: int
    reason: str = ""


def fold_frequencies(omega: np.ndarray, branch_step: float) -> np.ndarray:
    """Fold angular frequencies into the symmetric branch ``[-pi/step, pi/step)``."""
    half = np.pi / branch_step
    width = 2.0 * half
    w = np.mod(np.asarray(omega, dtype=float) + half, width) - half
    # values that roundoff pushed just under the upper edge belong to -half
    w = np.where(w >= half - 1e-12 * max(1.0, half), w - width, w)
    return w


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    if values.size == 0:
        return []
    breaks = np.nonzero(np.diff(values) > tol)[0] + 1
    return np.split(np.arange(values.size), breaks)


def translational_certificate(
    H: Operator,
    hbar: float = 1.0,
    *,
    branch_step: float | None = None,
    tol_spec: float = TOL_SPEC,
) -> TranslationalCertificate:
    """Test the spectrum of ``H`` for uniform-lattice, constant-multiplicity form.

    If ``branch_step`` is given the spectrum is read as that of the
    symmetric-branch generator of ``U(branch_step)``: frequencies are folded
    into ``[-pi/branch_step, pi/branch_step)`` first.  Failure is reported
    through ``passes=False``, never raised.
    """
    _require_hermitian(H)
    # computed afresh from the matrix: a seeded analytic cache must not vouch for itself
    m = H.matrix
    omega = np.linalg.eigvalsh(0.5 * (m + m.conj().T)) / hbar
    if branch_step is not None:
        omega = fold_frequencies(omega, branch_step)
    omega = np.sort(omega)
    tol_w = tol_spec / hbar
    groups = _clusters(omega, tol_w)
    counts = [g.size for g in groups]
    means = np.array([omega[g].mean() for g in groups])
    d = counts[0]
    levels = len(groups)

    if levels == 1:
        step = 2.0 * np.pi / branch_step if branch_step is not None else 0.0
        ideal_k = np.zeros(1)
    else:
        step = float(means[-1] - means[0]) / (levels - 1)
        ideal_k = _symmetric_integers(levels).astype(float)
    ideal = np.repeat(ideal_k * step, counts)
    residual = float(np.max(np.abs(omega - ideal))) * hbar

    reason = ""
    if any(c != d for c in counts):
        reason = f"multiplicities not constant: {sorted(set(counts))}"
    elif residual > tol_spec:
        reason = "spectrum is not a symmetric uniform lattice"
    return TranslationalCertificate(
        passes=not reason,
        lattice_step=float(step),
        multiplicity=int(d),
        max_residual=residual,
        levels=levels,
        reason=reason,
    )


def _phase_fix(b: np.ndarray) -> np.ndarray:
    b = b.copy()
    for c in range(b.shape[1]):
        mags = np.abs(b[:, c])
        j = int(np.nonzero(mags >= mags.max() - 1e-8)[0][0])
        b[:, c] *= np.conj(b[j, c]) / mags[j]
    return b


def spectral_clusters(H: Operator, tol_spec: float = TOL_SPEC) -> list[tuple[float, np.ndarray]]:
    """Eigenvalue clusters of ``H`` with a canonical orthonormal basis for each.

    Clusters are ascending and formed from consecutive eigenvalues closer than
    ``tol_spec``.  Within a cluster the basis is derived from the (basis
    independent) spectral projector by pivoted QR, and each vector is
    phase-fixed so its first component of largest magnitude is real positive.
    """
    _require_hermitian(H)
    w, v = H.eigh
    out = []
    for g in _clusters(w, tol_spec):
        vc = v[:, g]
        if g.size == 1:
            basis = vc
        else:
            proj = vc @ vc.conj().T
            q, _, _ = scipy.linalg.qr(proj, pivoting=True, mode="economic")
            basis = q[:, : g.size]
        out.append((float(w[g].mean()), _phase_fix(basis)))
    return out


def branch_generator(H: Operator, step: float, hbar: float = 1.0) -> Operator:
    """Symmetric-branch generator of ``U(step) = exp(-i step H / hbar)``.

    Equal to ``(i hbar / step) log U(step)`` with eigenfrequencies folded into
    ``[-pi/step, pi/step)``; it generates the same evolution as ``H`` at all
    integer multiples of ``step``.
    """
    _require_hermitian(H)
    w, v = H.eigh
    folded = hbar * fold_frequencies(w / hbar, step)
    m = (v * folded) @ v.conj().T
    op = Operator(0.5 * (m + m.conj().T), frozenset({"hermitian"}))
    op.__dict__["eigh"] = _sorted_pairs(folded, v)
    return op


def _sorted_pairs(w: np.ndarray, v: np.ndarray):
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def operator_schmidt_rank(op: Operator, dims: tuple[int, int], tol: float = TOL_ALG) -> int:
    """Number of terms needed to write ``op`` as a sum of products ``A (x) B``."""
    m, n = dims
    if m * n != op.dim:
        raise DimensionMismatchError(f"dims {dims} do not factor an operator of dim {op.dim}")
    r = op.matrix.reshape(m, n, m, n).transpose(0, 2, 1, 3).reshape(m * m, n * n)
    s = np.linalg.svd(r, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))
