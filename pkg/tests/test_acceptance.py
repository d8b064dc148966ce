"""Acceptance suite: one test per criterion, tolerances and time budgets pinned.

Each suite returns a JSON-able summary; the determinism criterion recomputes
every summary and compares the emitted bytes.  All evolutions performed by
suites 1 to 6 are recorded through the evolution hooks and audited by
criterion 7.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from tqslab.cli import dumps, main
from tqslab.clock import compose, history_gram, page_wootters_state, random_commensurate_system, theorem2_certificate
from tqslab.equivalence import build_intertwiner, cycle_pair, inequivalence_report, orbit_sum_word_trace, phase_grid_pair
from tqslab.hilbert import GridSpec, Operator, StateVector, recording_evolutions
from tqslab.koopman import (
    ccr_dichotomy_report,
    drift_phase_system,
    exponential_consistency,
    koopman_lift,
    random_equal_orbit_system,
    theorem3_certificate,
)
from tqslab.measurement import (
    MeasurementModel,
    admissible_steps,
    calibration_residuals,
    heisenberg_translation_check,
    interaction_certificate,
    random_model,
)
from tqslab.weyl import WeylModel, lightlike_shift_check, spin_commutator_residual

TOL_ALG = 1e-10
TOL_SPEC = 1e-8
TOL_COMMUTE = 1e-12
NEGATIVE_CONTROL = 1e-3
MIN_GAP = 0.1
MIN_DEFECT = 0.1
ENERGY_DRIFT = 1e-10

BUDGET = {1: 5.0, 2: 10.0, 3: 5.0, 4: 10.0, 5: 5.0, 6: 5.0}

SUMMARIES: dict[int, str] = {}


@pytest.fixture(scope="module")
def evolutions():
    with recording_evolutions() as records:
        yield records


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def report(number, summary, elapsed):
    """Print the criterion's evidence line and keep its bytes for the determinism rerun."""
    SUMMARIES[number] = dumps(summary)
    print(f"criterion {number}: {json.dumps(summary, sort_keys=True)} in {elapsed:.2f}s (budget {BUDGET.get(number, 0):g}s)")


# -- suites -----------------------------------------------------------------------


def measurement_suite():
    rng = np.random.default_rng(20240501)
    models = [random_model(rng, max_lambda=4, max_degeneracy=3, max_points=32) for _ in range(24)]
    # equal |lambda| share one frequency lattice, so the Hamiltonian itself certifies
    shared = [
        MeasurementModel(((-1, 2), (1, 1)), GridSpec(9, 1.0, -4.0)),
        MeasurementModel(((-3, 1), (3, 3)), GridSpec(16, 0.5, -4.0), coupling=0.5),
    ]
    calib, heis, steps, certs = 0.0, 0.0, 0, []
    for m in models + shared:
        lams = [lam for lam, _ in m.spectrum]
        assert all(lam == int(lam) and 1 <= abs(lam) <= 4 for lam in lams)
        assert all(d <= 3 for _, d in m.spectrum) and m.pointer_dim <= 32
        calib = max(calib, max(calibration_residuals(m)))
        for s in admissible_steps(m):
            heis = max(heis, heisenberg_translation_check(m, s))
            steps += 1
    for m in shared:
        # read on the symmetric branch of U(s0): at even n the mirrored blocks carry opposite Nyquist points
        c = interaction_certificate(m, TOL_SPEC)
        certs.append(c.passes and c.multiplicity == m.system_dim)
    return {"models": len(models) + len(shared), "steps": steps, "calibration": calib, "heisenberg": heis, "shared_lattice_certified": all(certs)}


def clock_suite():
    rng = np.random.default_rng(7)
    gram, pw, inv, certs, count = 0.0, 0.0, 0.0, True, 0
    for _ in range(24):
        g = GridSpec(int(rng.integers(2, 17)), float(rng.choice([0.5, 1.0, 2.0])))
        m = int(rng.integers(1, 9))
        comp = compose(g, random_commensurate_system(rng, g, m))
        b = [StateVector.basis(m, i) for i in range(m)]
        gram = max(gram, float(np.max(np.abs(history_gram(comp, b) - np.eye(g.n_points * m)))))
        c = theorem2_certificate(comp, TOL_ALG, TOL_SPEC)
        certs &= c.passes and c.multiplicity == m
        psi0 = StateVector.normalize(rng.normal(size=m) + 1j * rng.normal(size=m))
        r = page_wootters_state(comp, psi0)
        pw, inv = max(pw, r.constraint_residual), max(inv, r.invariance_residual)
        count += 1
    negative = []
    for _ in range(6):
        g = GridSpec(int(rng.integers(4, 17)))
        step = 2 * np.pi / g.period
        # half a lattice step off: as far from commensurate as possible
        e = step * (rng.integers(-5, 6, size=3) + 0.5)
        comp = compose(g, Operator(np.diag(e), frozenset({"hermitian", "diagonal"})))
        r = page_wootters_state(comp, StateVector.normalize(np.ones(3)), allow_incommensurate=True)
        negative.append(min(r.constraint_residual, r.invariance_residual))
    return {
        "composites": count,
        "gram": gram,
        "certified": bool(certs),
        "constraint": pw,
        "invariance": inv,
        "negative_min": min(negative),
    }


def weyl_suite():
    worst, comm, count = 0.0, 0.0, 0
    for n in range(1, 65):
        for chi in ("+", "-"):
            m = WeylModel(GridSpec(n, 0.5), chi, c=2.0)
            comm = max(comm, spin_commutator_residual(m))
            for spin in ("up", "down"):
                for k in range(-n, n + 1):
                    worst = max(worst, lightlike_shift_check(m, spin, k))
                    count += 1
    return {"checks": count, "shift": worst, "commutator": comm}


def koopman_suite():
    rng = np.random.default_rng(11)
    exp_res, certs, preserved, count = 0.0, True, True, 0
    sizes = []
    for _ in range(24):
        L = int(rng.integers(1, 33))
        k = int(rng.integers(1, 128 // L + 1))
        rep = koopman_lift(random_equal_orbit_system(rng, k, L, float(rng.choice([0.25, 1.0, 1.5]))))
        r = theorem3_certificate(rep, TOL_ALG, TOL_SPEC)
        certs &= r.certificate.passes and r.certificate.multiplicity == k
        preserved &= r.basis_preserved
        exp_res = max(exp_res, exponential_consistency(rep))
        sizes.append(rep.dim)
        count += 1
    assert max(sizes) <= 128
    return {"systems": count, "certified": bool(certs), "basis_preserved": bool(preserved), "exponential": exp_res}


def ccr_suite():
    out = []
    for nq, npp in ((2, 2), (4, 4), (3, 5), (8, 8), (4, 16), (16, 16)):
        rep = koopman_lift(drift_phase_system(nq, npp))
        r = ccr_dichotomy_report(rep, GridSpec(nq), GridSpec(npp))
        out.append({"grid": [nq, npp], "commutator": r.commutator_qp, "weyl": r.weyl_residual, "defect": r.infinitesimal_defect})
    return {"grids": out}


def equivalence_suite():
    from tqslab.koopman import cycle_system

    s = np.arange(8)
    systems = {
        "cycle": (
            cycle_system([8], properties={"f": s.astype(float)}),
            cycle_system([8], properties={"f": ((s * s) % 8).astype(float)}),
            cycle_pair(),
        ),
        "phase_grid": (drift_phase_system(8, 8, 0), drift_phase_system(4, 16, 8), phase_grid_pair()),
    }
    out = {}
    for name, (d1, d2, (t1, t2)) in systems.items():
        M = build_intertwiner(t1, t2)
        c = inequivalence_report(t1, t2, M)
        oracle = 0.0
        for w in c.word_traces:
            o1 = orbit_sum_word_trace(d1, w.letters, d1.properties)
            o2 = orbit_sum_word_trace(d2, w.letters, d2.properties)
            oracle = max(oracle, abs(o1 - w.value1) / max(1.0, abs(o1)), abs(o2 - w.value2) / max(1.0, abs(o2)))
        best = max(c.word_traces, key=lambda w: w.gap)
        out[name] = {
            "hamiltonian": c.hamiltonian_residual,
            "trajectory": c.trajectory_residual,
            "max_gap": c.max_gap,
            "witness": best.word,
            "oracle": oracle,
        }
    return out


SUITES = {1: measurement_suite, 2: clock_suite, 3: weyl_suite, 4: koopman_suite, 5: ccr_suite, 6: equivalence_suite}


# -- criteria -------------------------------------------------------------------------


@pytest.mark.criterion(1, "measurement calibration and time-operator translation on >= 20 random models, < 5 s")
def test_criterion_1_measurement(evolutions):
    s, dt = timed(measurement_suite)
    report(1, s, dt)
    assert s["models"] >= 20
    assert s["calibration"] <= TOL_ALG
    assert s["heisenberg"] <= TOL_ALG
    assert s["shared_lattice_certified"]
    assert dt < BUDGET[1]


@pytest.mark.criterion(2, "clock composites: history Gram, multiplicity certificate, history-state constraint, negative controls, < 10 s")
def test_criterion_2_clock(evolutions):
    s, dt = timed(clock_suite)
    report(2, s, dt)
    assert s["composites"] >= 20
    assert s["gram"] <= TOL_ALG
    assert s["certified"]
    assert s["constraint"] <= TOL_ALG and s["invariance"] <= TOL_ALG
    assert s["negative_min"] > NEGATIVE_CONTROL
    assert dt < BUDGET[2]


@pytest.mark.criterion(3, "Weyl fermion rigid lightlike transport for n <= 64, spin decoupling, < 5 s")
def test_criterion_3_weyl(evolutions):
    s, dt = timed(weyl_suite)
    report(3, s, dt)
    assert s["shift"] <= TOL_ALG
    assert s["commutator"] <= TOL_COMMUTE
    assert dt < BUDGET[3]


@pytest.mark.criterion(4, "Koopman lift of >= 20 random bijections on <= 128 states, < 10 s")
def test_criterion_4_koopman(evolutions):
    s, dt = timed(koopman_suite)
    report(4, s, dt)
    assert s["systems"] >= 20
    assert s["certified"] and s["basis_preserved"]
    assert s["exponential"] <= TOL_ALG
    assert dt < BUDGET[4]


@pytest.mark.criterion(5, "commuting phase-space observables vs Weyl-form conjugacy, infinitesimal defect > 0.1, < 5 s")
def test_criterion_5_ccr(evolutions):
    s, dt = timed(ccr_suite)
    report(5, s, dt)
    for g in s["grids"]:
        assert g["commutator"] == 0.0
        assert g["weyl"] <= TOL_ALG
        if g["grid"][0] >= 4:
            assert g["defect"] > MIN_DEFECT
    assert dt < BUDGET[5]


@pytest.mark.criterion(6, "unitarily intertwined triples with a word-trace gap >= 0.1 confirmed by the oracle, < 5 s")
def test_criterion_6_equivalence(evolutions):
    s, dt = timed(equivalence_suite)
    report(6, s, dt)
    for pair in s.values():
        assert pair["hamiltonian"] <= TOL_ALG and pair["trajectory"] <= TOL_ALG
        assert pair["max_gap"] >= MIN_GAP
        assert pair["oracle"] <= TOL_ALG
    assert dt < BUDGET[6]


@pytest.mark.criterion(7, "energy expectation drift <= 1e-10 across every recorded evolution of suites 1-6")
def test_criterion_7_energy_drift(evolutions):
    assert set(SUMMARIES) >= {1, 2, 3, 4, 5, 6}, "suites 1-6 must run first"
    states = [r for r in evolutions if r.kind == "state"]
    props = [r for r in evolutions if r.kind == "propagator"]
    worst = max(r.energy_drift for r in evolutions)
    print(f"criterion 7: {len(states)} state evolutions, {len(props)} propagators, worst energy drift {worst:.3g}")
    assert states and props
    assert worst <= ENERGY_DRIFT
    assert max(r.norm_drift for r in evolutions) <= TOL_ALG


@pytest.mark.criterion(8, "rerunning the suites and the CLI demos gives byte-identical JSON")
def test_criterion_8_determinism(tmp_path):
    assert set(SUMMARIES) >= set(SUITES), "suites 1-6 must run first"
    for number, fn in SUITES.items():
        assert dumps(fn()) == SUMMARIES[number], f"suite {number} output changed on rerun"
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["demo", "all", "--out", str(a)]) == 0
    assert main(["demo", "all", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    env = dict(os.environ, TQSLAB_THREADS="4")
    proc = subprocess.run([sys.executable, "-m", "tqslab", "demo", "all", "--out", str(c)], env=env, capture_output=True)
    assert proc.returncode == 0, proc.stderr
    assert c.read_bytes() == a.read_bytes()
