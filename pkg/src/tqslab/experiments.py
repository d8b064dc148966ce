"""Experiment configs, dispatch to the physics modules, and run reports.

A config is a JSON object with a ``"kind"`` discriminator.  Parsing builds
and validates every model before anything is computed; a malformed config
raises :class:`~tqslab.errors.ConfigError`.  Running never raises on a failed
verification: the failure is recorded as a check with ``"pass": false``.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import __version__
from .clock import (
    CompositeSystem,
    commensurability,
    compose,
    history_gram_check,
    lattice_system,
    page_wootters_state,
    theorem2_certificate,
)
from .equivalence import (
    AnchorRelaxedWarning,
    build_intertwiner,
    inequivalence_report,
    orbit_sum_word_trace,
    triple_from_koopman,
)
from .errors import ConfigError, TQSError
from .hilbert import (
    TOL_ALG,
    TOL_SPEC,
    GridSpec,
    Operator,
    StateVector,
    TranslationalCertificate,
    spectral_clusters,
    translation_generator,
    translational_certificate,
    weyl_translation_check,
    time_operator,
)
from .koopman import (
    DynamicalSystem,
    ccr_dichotomy_report,
    cycle_system,
    drift_phase_system,
    exponential_consistency,
    koopman_lift,
    theorem3_certificate,
)
from .measurement import (
    MeasurementModel,
    admissible_steps,
    build_interaction_hamiltonian,
    calibration_residuals,
    common_translation_step,
    factorization_preserved,
    heisenberg_translation_check,
    interaction_certificate,
)
from .weyl import (
    SPINS,
    WeylModel,
    build_weyl_hamiltonian,
    combined_certificate,
    lightlike_shift_check,
    spin_commutator_residual,
)

KINDS = ("measure", "clock", "weyl", "koopman", "equiv", "generator")


@dataclass(frozen=True)
class Check:
    """One verified quantity, always reported with its tolerance.

    ``relation`` is ``"<="`` (residual must stay below) or ``">"`` (a gap or
    defect must exceed the threshold).
    """

    name: str
    value: float
    tolerance: float
    relation: str = "<="

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        if self.relation == "<=":
            return self.value <= self.tolerance
        return self.value > self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "relation": self.relation,
            "pass": self.passed,
        }


@dataclass
class RunReport:
    kind: str
    name: str
    input: Mapping[str, Any]
    checks: list[Check] = field(default_factory=list)
    certificates: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    duration: float | None = None
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, tolerance: float, relation: str = "<=") -> Check:
        c = Check(name, float(value), float(tolerance), relation)
        self.checks.append(c)
        return c

    def fail(self, name: str, message: str) -> None:
        """Record a verification that could not even be evaluated."""
        self.checks.append(Check(name, math.inf, 0.0))
        self.notes.append(f"{name}: {message}")

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "kind": self.kind,
            "name": self.name,
            "input": dict(self.input),
            "checks": [c.to_dict() for c in self.checks],
            "certificates": self.certificates,
            "notes": list(self.notes),
            "pass": self.passed,
            "version": self.version,
        }
        if timing and self.duration is not None:
            out["duration_s"] = self.duration
        return out


def cert_dict(cert: TranslationalCertificate) -> dict:
    return {
        "passes": cert.passes,
        "lattice_step": cert.lattice_step,
        "multiplicity": cert.multiplicity,
        "levels": cert.levels,
        "max_residual": cert.max_residual,
        "reason": cert.reason,
    }


# -- parsing ------------------------------------------------------------------


@dataclass(frozen=True)
class Settings:
    """Command-line overrides; ``None`` keeps the config value."""

    tol_alg: float | None = None
    tol_spec: float | None = None
    hbar: float | None = None


@dataclass(frozen=True)
class Experiment:
    """A validated config, ready to run."""

    kind: str
    name: str
    echo: Mapping[str, Any]
    tol_alg: float
    tol_spec: float
    hbar: float
    model: Any


def _get(cfg: Mapping, key: str, default=None, *, required: bool = False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing required field {key!r}")
    return default


def _number(x, what: str, *, positive: bool = False, integer: bool = False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{what} must be a number, got {x!r}")
    if not math.isfinite(x):
        raise ConfigError(f"{what} must be finite")
    if integer and int(x) != x:
        raise ConfigError(f"{what} must be an integer, got {x!r}")
    if positive and not x > 0:
        raise ConfigError(f"{what} must be positive, got {x!r}")
    return int(x) if integer else float(x)


def _grid(cfg, what: str, default_origin: float = 0.0) -> GridSpec:
    if not isinstance(cfg, Mapping):
        raise ConfigError(f"{what} must be an object with 'n' and optional 'spacing', 'origin'")
    n = _number(_get(cfg, "n", required=True), f"{what}.n", positive=True, integer=True)
    spacing = _number(_get(cfg, "spacing", 1.0), f"{what}.spacing", positive=True)
    origin = _number(_get(cfg, "origin", default_origin), f"{what}.origin")
    try:
        return GridSpec(n, spacing, origin)
    except TQSError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _complex_array(x, what: str) -> np.ndarray:
    """Real nested lists, or ``{"re": ..., "im": ...}``."""
    try:
        if isinstance(x, Mapping):
            re = np.asarray(x.get("re", 0.0), dtype=float)
            im = np.asarray(x.get("im", np.zeros_like(re)), dtype=float)
            return re + 1j * im
        return np.asarray(x, dtype=float).astype(complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} is not a numeric array: {exc}") from exc


def _tolerances(cfg: Mapping, settings: Settings) -> tuple[float, float, float]:
    tols = _get(cfg, "tolerances", {})
    if not isinstance(tols, Mapping):
        raise ConfigError("tolerances must be an object")
    tol_alg = _number(tols.get("alg", TOL_ALG), "tolerances.alg", positive=True)
    tol_spec = _number(tols.get("spec", TOL_SPEC), "tolerances.spec", positive=True)
    hbar = _number(_get(cfg, "hbar", 1.0), "hbar", positive=True)
    # command-line flags win over the file
    if settings.tol_alg is not None:
        tol_alg = settings.tol_alg
    if settings.tol_spec is not None:
        tol_spec = settings.tol_spec
    if settings.hbar is not None:
        hbar = settings.hbar
    return tol_alg, tol_spec, hbar


def _parse_measure(cfg, hbar):
    spec = _get(cfg, "spectrum", required=True)
    if not isinstance(spec, Sequence) or isinstance(spec, str) or not spec:
        raise ConfigError("spectrum must be a non-empty list of [eigenvalue, degeneracy] pairs")
    pairs = []
    for item in spec:
        if not isinstance(item, Sequence) or len(item) != 2:
            raise ConfigError(f"spectrum entry {item!r} is not an [eigenvalue, degeneracy] pair")
        pairs.append((_number(item[0], "eigenvalue"), _number(item[1], "degeneracy", positive=True, integer=True)))
    grid = _grid(_get(cfg, "pointer", required=True), "pointer")
    g = _number(_get(cfg, "coupling", 1.0), "coupling")
    T = _number(_get(cfg, "duration", 1.0), "duration", positive=True)
    allow_wrap = bool(_get(cfg, "allow_wrap", False))
    try:
        return MeasurementModel(tuple(pairs), grid, g, T, hbar), allow_wrap
    except TQSError as exc:
        raise ConfigError(f"measure: {exc}") from exc


def _parse_clock(cfg, hbar):
    grid = _grid(_get(cfg, "clock", required=True), "clock")
    system = _get(cfg, "system", required=True)
    if not isinstance(system, Mapping):
        raise ConfigError("system must be an object with 'lattice_integers', 'energies' or 'hamiltonian'")
    if "lattice_integers" in system:
        ints = [_number(m, "lattice integer", integer=True) for m in system["lattice_integers"]]
        if not ints:
            raise ConfigError("lattice_integers must be non-empty")
        H_R = lattice_system(grid, ints, hbar)
    elif "energies" in system:
        e = [_number(x, "energy") for x in system["energies"]]
        if not e:
            raise ConfigError("energies must be non-empty")
        H_R = Operator(np.diag(e), frozenset({"hermitian", "diagonal"}))
    elif "hamiltonian" in system:
        h = _complex_array(system["hamiltonian"], "system.hamiltonian")
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
            raise ConfigError("system.hamiltonian must be a square matrix")
        if np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
            raise ConfigError("system.hamiltonian must be Hermitian")
        H_R = Operator(0.5 * (h + h.conj().T), frozenset({"hermitian"}))
    else:
        raise ConfigError("system needs one of 'lattice_integers', 'energies', 'hamiltonian'")
    psi0 = _get(cfg, "psi0")
    if psi0 is None:
        psi = StateVector.uniform(H_R.dim)
    else:
        a = _complex_array(psi0, "psi0")
        if a.shape != (H_R.dim,) or np.linalg.norm(a) == 0:
            raise ConfigError(f"psi0 must be a nonzero vector of length {H_R.dim}")
        psi = StateVector(a / np.linalg.norm(a))
    return compose(grid, H_R, hbar), psi


def _parse_weyl(cfg, hbar):
    grid = _grid(_get(cfg, "z", required=True), "z")
    c = _number(_get(cfg, "c", 1.0), "c", positive=True)
    chir = _get(cfg, "chirality", "both")
    chiralities = ("+", "-") if chir == "both" else (chir,)
    try:
        return tuple(WeylModel(grid, ch, c, hbar) for ch in chiralities)
    except TQSError as exc:
        raise ConfigError(f"weyl: {exc}") from exc


def _parse_dynsys(cfg, what: str) -> DynamicalSystem:
    if not isinstance(cfg, Mapping):
        raise ConfigError(f"{what} must be an object")
    dt = _number(_get(cfg, "dt", 1.0), f"{what}.dt", positive=True)
    try:
        if "drift" in cfg:
            d = cfg["drift"]
            if not isinstance(d, Mapping):
                raise ConfigError(f"{what}.drift must be an object with n_q, n_p, wrap_shift")
            nq = _number(_get(d, "n_q", required=True), "n_q", positive=True, integer=True)
            npp = _number(_get(d, "n_p", required=True), "n_p", positive=True, integer=True)
            shift = _number(_get(d, "wrap_shift", 0), "wrap_shift", integer=True)
            return drift_phase_system(nq, npp, shift, dt)
        props = _get(cfg, "properties", {})
        if not isinstance(props, Mapping):
            raise ConfigError(f"{what}.properties must map names to value lists")
        props = {str(k): [_number(x, f"property {k}") for x in v] for k, v in props.items()}
        if "cycles" in cfg:
            lengths = [_number(L, "cycle length", positive=True, integer=True) for L in cfg["cycles"]]
            if not lengths:
                raise ConfigError(f"{what}.cycles must be non-empty")
            return cycle_system(lengths, dt, props)
        step = _get(cfg, "step", required=True)
        step = tuple(_number(s, "step entry", integer=True) for s in step)
        weights = _get(cfg, "weights")
        if weights is not None:
            weights = tuple(_number(w, "weight", positive=True) for w in weights)
        shape = _get(cfg, "shape")
        if shape is not None:
            shape = tuple(_number(s, "shape entry", positive=True, integer=True) for s in shape)
            if len(shape) != 2:
                raise ConfigError(f"{what}.shape must be [n_q, n_p]")
        return DynamicalSystem(step, dt, weights, props, shape)
    except ConfigError:
        raise
    except TQSError as exc:
        raise ConfigError(f"{what}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _builtin_pair(name: str) -> tuple[dict, dict]:
    s = np.arange(8)
    if name == "cycle":
        return (
            {"cycles": [8], "properties": {"f": s.tolist()}},
            {"cycles": [8], "properties": {"f": ((s * s) % 8).tolist()}},
        )
    if name == "phase_grid":
        return {"drift": {"n_q": 8, "n_p": 8, "wrap_shift": 0}}, {"drift": {"n_q": 4, "n_p": 16, "wrap_shift": 8}}
    raise ConfigError(f"unknown built-in pair {name!r}; use 'cycle' or 'phase_grid'")


def _parse_equiv(cfg, hbar):
    if "pair" in cfg:
        c1, c2 = _builtin_pair(cfg["pair"])
    else:
        systems = _get(cfg, "systems", required=True)
        if not isinstance(systems, Sequence) or len(systems) != 2:
            raise ConfigError("systems must list exactly two dynamical systems")
        c1, c2 = systems
    d1 = _parse_dynsys(c1, "systems[0]")
    d2 = _parse_dynsys(c2, "systems[1]")
    anchors = _get(cfg, "anchors", [0, 0])
    if not isinstance(anchors, Sequence) or len(anchors) != 2:
        raise ConfigError("anchors must be two basis-state indices")
    a1 = _number(anchors[0], "anchor", integer=True)
    a2 = _number(anchors[1], "anchor", integer=True)
    for a, d in ((a1, d1), (a2, d2)):
        if not 0 <= a < d.size:
            raise ConfigError(f"anchor {a} outside 0..{d.size - 1}")
    max_len = _number(_get(cfg, "max_word_len", 4), "max_word_len", positive=True, integer=True)
    expect = _get(cfg, "expect", "inequivalent")
    if expect not in ("inequivalent", "equivalent"):
        raise ConfigError("expect must be 'inequivalent' or 'equivalent'")
    r1, r2 = koopman_lift(d1, hbar), koopman_lift(d2, hbar)
    try:
        t1 = triple_from_koopman(r1, a1, "first")
        t2 = triple_from_koopman(r2, a2, "second")
    except TQSError as exc:
        raise ConfigError(f"equiv: {exc}") from exc
    if set(t1.observables) != set(t2.observables):
        raise ConfigError("both systems must define the same property names (observables pair by name)")
    return (d1, d2, t1, t2, max_len, expect)


def _parse_generator(cfg, hbar):
    return _grid(_get(cfg, "grid", required=True), "grid")


_PARSERS = {
    "measure": _parse_measure,
    "clock": _parse_clock,
    "weyl": _parse_weyl,
    "koopman": lambda cfg, hbar: koopman_lift(_parse_dynsys(cfg, "koopman"), hbar),
    "equiv": _parse_equiv,
    "generator": _parse_generator,
}


def parse_experiment(cfg: Mapping, settings: Settings = Settings(), index: int = 0) -> Experiment:
    if not isinstance(cfg, Mapping):
        raise ConfigError(f"experiment #{index} must be a JSON object")
    kind = cfg.get("kind")
    if kind not in _PARSERS:
        raise ConfigError(f"experiment #{index}: kind must be one of {list(KINDS)}, got {kind!r}")
    tol_alg, tol_spec, hbar = _tolerances(cfg, settings)
    name = str(cfg.get("name", f"{kind}-{index}"))
    model = _PARSERS[kind](cfg, hbar)
    return Experiment(kind, name, dict(cfg), tol_alg, tol_spec, hbar, model)


def parse_config(doc: Any, settings: Settings = Settings()) -> list[Experiment]:
    """Accept one experiment object, a list of them, or ``{"experiments": [...]}``."""
    if isinstance(doc, Mapping) and "experiments" in doc:
        doc = doc["experiments"]
    items = [doc] if isinstance(doc, Mapping) else doc
    if not isinstance(items, list) or not items:
        raise ConfigError("config must be an experiment object or a non-empty list of them")
    return [parse_experiment(c, settings, i) for i, c in enumerate(items)]


# -- running ------------------------------------------------------------------


def _run_measure(exp: Experiment, rep: RunReport) -> None:
    model, allow_wrap = exp.model
    try:
        res = calibration_residuals(model, allow_wrap)
        rep.add("calibration_residual", max(res), exp.tol_alg)
    except TQSError as exc:
        rep.fail("calibration_residual", str(exc))
        return
    steps = admissible_steps(model)
    worst = max(heisenberg_translation_check(model, s) for s in steps)
    rep.add("heisenberg_translation_residual", worst, exp.tol_alg)
    cert = interaction_certificate(model, exp.tol_spec)
    rep.certificates["interaction"] = cert_dict(cert)
    rep.certificates["common_translation_step"] = common_translation_step(model)
    rep.certificates["admissible_step_count"] = len(steps)
    rep.certificates["time_operator_factorizes"] = factorization_preserved(model, exp.tol_alg)


def _run_clock(exp: Experiment, rep: RunReport) -> None:
    comp, psi0 = exp.model
    comp: CompositeSystem
    ints, lattice_res = commensurability(comp)
    rep.add("lattice_residual", lattice_res, exp.tol_alg)
    basis = [StateVector.basis(comp.system_dim, b) for b in range(comp.system_dim)]
    rep.add("history_gram_offdiagonal", history_gram_check(comp, basis), exp.tol_alg)
    try:
        cert = theorem2_certificate(comp, exp.tol_alg, exp.tol_spec)
        rep.certificates["composite"] = cert_dict(cert)
        rep.add("certificate_residual", cert.max_residual, exp.tol_spec)
        rep.add("multiplicity_mismatch", abs(cert.multiplicity - comp.system_dim), 0)
    except TQSError as exc:
        rep.fail("certificate_residual", str(exc))
    pw = page_wootters_state(comp, psi0, allow_incommensurate=True, tol_alg=exp.tol_alg)
    rep.add("constraint_residual", pw.constraint_residual, exp.tol_alg)
    rep.add("invariance_residual", pw.invariance_residual, exp.tol_alg)
    rep.certificates["raw_kronecker_constraint_residual"] = pw.raw_constraint_residual
    rep.certificates["lattice_integers"] = [int(m) for m in ints]


def _run_weyl(exp: Experiment, rep: RunReport) -> None:
    for model in exp.model:
        n = model.z_grid.n_points
        worst = max(
            lightlike_shift_check(model, spin, k) for spin in SPINS for k in range(-n, n + 1)
        )
        tag = model.chirality
        rep.add(f"lightlike_shift[{tag}]", worst, exp.tol_alg)
        rep.add(f"spin_commutator[{tag}]", spin_commutator_residual(model), exp.tol_alg)
        cert = combined_certificate(model, exp.tol_spec)
        rep.certificates[f"hamiltonian[{tag}]"] = cert_dict(cert)
        rep.add(f"certificate_residual[{tag}]", cert.max_residual, exp.tol_spec)


def _run_koopman(exp: Experiment, rep: RunReport) -> None:
    krep = exp.model
    rep.add("exponential_consistency", exponential_consistency(krep), exp.tol_alg)
    rep.certificates["orbit_lengths"] = list(krep.orbit_lengths)
    try:
        t3 = theorem3_certificate(krep, exp.tol_alg, exp.tol_spec)
    except TQSError as exc:
        rep.fail("theorem3_certificate", str(exc))
        return
    rep.certificates["theorem3"] = cert_dict(t3.certificate)
    rep.certificates["horizon"] = t3.horizon
    rep.add("certificate_residual", t3.certificate.max_residual, exp.tol_spec)
    rep.add("multiplicity_mismatch", abs(t3.certificate.multiplicity - t3.orbit_count), 0)
    rep.add("power_residual", t3.power_residual, exp.tol_alg)
    shape = krep.dynsys.shape
    if shape is not None:
        nq, npp = shape
        ccr = ccr_dichotomy_report(krep, GridSpec(nq), GridSpec(npp), exp.tol_alg)
        rep.add("commutator_qp", ccr.commutator_qp, 0)
        rep.add("weyl_residual", ccr.weyl_residual, exp.tol_alg)
        rep.certificates["infinitesimal_ccr_defect"] = ccr.infinitesimal_defect
        rep.certificates["generator_support"] = ccr.generator_support
        rep.certificates["observable_support"] = ccr.observable_support


def _run_equiv(exp: Experiment, rep: RunReport) -> None:
    d1, d2, t1, t2, max_len, expect = exp.model
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AnchorRelaxedWarning)
        try:
            M = build_intertwiner(t1, t2, tol_alg=exp.tol_alg, tol_spec=exp.tol_spec)
        except TQSError as exc:
            rep.fail("intertwiner", str(exc))
            return
    rep.notes.extend(str(w.message) for w in caught)
    m = M.matrix
    rep.add("intertwiner_unitarity", float(np.max(np.abs(m.conj().T @ m - np.eye(M.dim)))), exp.tol_alg)
    cert = inequivalence_report(t1, t2, M, max_len, tol_alg=exp.tol_alg)
    rep.add("hamiltonian_residual", cert.hamiltonian_residual, exp.tol_alg)
    rep.add("trajectory_residual", cert.trajectory_residual, exp.tol_alg)
    oracle = 0.0
    for w in cert.word_traces:
        o1 = orbit_sum_word_trace(d1, w.letters, d1.properties)
        o2 = orbit_sum_word_trace(d2, w.letters, d2.properties)
        scale = max(1.0, abs(o1), abs(o2))
        oracle = max(oracle, abs(o1 - w.value1) / scale, abs(o2 - w.value2) / scale)
    rep.add("oracle_agreement", oracle, exp.tol_alg)
    if expect == "inequivalent":
        rep.add("max_word_trace_gap", cert.max_gap, cert.tol_gap, ">")
    else:
        rep.add("max_word_trace_gap", cert.max_gap, cert.tol_gap)
    rep.certificates["observable_distances"] = dict(cert.observable_distances)
    rep.certificates["word_count"] = len(cert.word_traces)
    rep.certificates["mismatches"] = [
        {"word": w.word, "value1": w.value1.real, "value2": w.value2.real, "gap": w.gap}
        for w in cert.invariant_mismatches[:10]
    ]


def _run_generator(exp: Experiment, rep: RunReport) -> None:
    grid = exp.model
    H = translation_generator(grid, exp.hbar)
    tau = time_operator(grid)
    worst = max(
        weyl_translation_check(tau, H, k * grid.spacing, exp.hbar, grid.period, origin=grid.origin)
        for k in range(-grid.n_points, grid.n_points + 1)
    )
    rep.add("weyl_residual", worst, exp.tol_alg)
    cert = translational_certificate(H, exp.hbar, tol_spec=exp.tol_spec)
    rep.certificates["generator"] = cert_dict(cert)
    rep.add("certificate_residual", cert.max_residual, exp.tol_spec)


_RUNNERS: dict[str, Callable[[Experiment, RunReport], None]] = {
    "measure": _run_measure,
    "clock": _run_clock,
    "weyl": _run_weyl,
    "koopman": _run_koopman,
    "equiv": _run_equiv,
    "generator": _run_generator,
}


def run_experiment(exp: Experiment) -> RunReport:
    import time

    rep = RunReport(exp.kind, exp.name, exp.echo)
    rep.certificates["tolerances"] = {"alg": exp.tol_alg, "spec": exp.tol_spec}
    rep.certificates["hbar"] = exp.hbar
    t0 = time.perf_counter()
    _RUNNERS[exp.kind](exp, rep)
    rep.duration = time.perf_counter() - t0
    return rep


def thread_count() -> int:
    raw = os.environ.get("TQSLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"TQSLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"TQSLAB_THREADS must be a positive integer, got {raw!r}")
    return n


def run_all(experiments: Sequence[Experiment], threads: int | None = None) -> list[RunReport]:
    """Run experiments, possibly concurrently; reports keep config order.

    BLAS is pinned to one thread so every result is bitwise reproducible
    whatever the experiment-level parallelism.
    """
    from threadpoolctl import threadpool_limits

    n = thread_count() if threads is None else threads
    with threadpool_limits(limits=1):
        if n == 1 or len(experiments) < 2:
            return [run_experiment(e) for e in experiments]
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(run_experiment, experiments))


def hamiltonian_of(exp: Experiment) -> Operator:
    """The Hamiltonian whose spectrum the ``spectrum`` command writes."""
    if exp.kind == "measure":
        return build_interaction_hamiltonian(exp.model[0])
    if exp.kind == "clock":
        return exp.model[0].translational_hamiltonian
    if exp.kind == "weyl":
        return build_weyl_hamiltonian(exp.model[0])
    if exp.kind == "koopman":
        return exp.model.hamiltonian
    if exp.kind == "equiv":
        return exp.model[2].hamiltonian
    return translation_generator(exp.model, exp.hbar)


def spectrum_rows(exp: Experiment) -> list[tuple[float, int]]:
    H = hamiltonian_of(exp)
    return [(e, b.shape[1]) for e, b in spectral_clusters(H, exp.tol_spec)]


# -- built-in showcase configs -------------------------------------------------

DEMOS: dict[str, list[dict]] = {
    "measure": [
        {"kind": "measure", "name": "two-level", "spectrum": [[1, 1], [2, 1]], "pointer": {"n": 8}},
        {
            "kind": "measure",
            "name": "signed-degenerate",
            "spectrum": [[-2, 2], [1, 1], [3, 3]],
            "pointer": {"n": 12, "spacing": 0.5, "origin": -1.0},
            "coupling": 0.5,
        },
    ],
    "clock": [
        {"kind": "clock", "name": "lattice-qutrit", "clock": {"n": 8}, "system": {"lattice_integers": [-3, 0, 5]}},
        {
            "kind": "clock",
            "name": "rotated-qubit",
            "clock": {"n": 6, "spacing": 0.5},
            "system": {"hamiltonian": {"re": [[0.0, 0.0], [0.0, 0.0]], "im": [[0.0, -2.0943951023931953], [2.0943951023931953, 0.0]]}},
        },
    ],
    "weyl": [
        {"kind": "weyl", "name": "odd-grid", "z": {"n": 9}},
        {"kind": "weyl", "name": "even-grid", "z": {"n": 16, "spacing": 0.25}, "c": 2.0},
    ],
    "koopman": [
        {"kind": "koopman", "name": "six-cycle", "cycles": [6]},
        {"kind": "koopman", "name": "three-four-cycles", "cycles": [4, 4, 4], "dt": 0.5},
        {"kind": "koopman", "name": "phase-grid", "drift": {"n_q": 8, "n_p": 8, "wrap_shift": 0}},
    ],
    "equiv": [
        {"kind": "equiv", "name": "cycle-observables", "pair": "cycle"},
        {"kind": "equiv", "name": "phase-grid-shapes", "pair": "phase_grid"},
    ],
}
DEMOS["all"] = [c for k in ("measure", "clock", "weyl", "koopman", "equiv") for c in DEMOS[k]]
