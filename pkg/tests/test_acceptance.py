"""
Acceptance suite.  Each test prints exactly one line

    ACCEPTANCE <n> PASS|FAIL <name>: <measured values>

to the terminal (bypassing capture) and then asserts.  Criteria 7, 11 and
12 take minutes; criterion 11 dominates the runtime.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from hiddenep import cli, store
from hiddenep.core import ModelParams, MomentumSector, build_core_matrix, build_sector, coalescing_residual, \
    jordan_residual
from hiddenep.dicke import DickeParams, ground_state_fidelity, onset_mu_c, vacuum_annihilation_residual
from hiddenep.numerics import eigh_tridiagonal, ipr, mipr
from hiddenep.pair import (build_barred_hamiltonian, build_pair_hamiltonian, calibrate_recursion_factor,
                           extended_state, ipr_vacuum_closed_form, project_block, recursive_eigenvector,
                           vacuum_closed_form)
from hiddenep.parallel import default_workers
from hiddenep.quench import dmu_scan, quench_np


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'} {name}: {detail}", flush=True)
        return ok
    return emit


def chain(mu, dk):
    return ModelParams(t=0.0, delta=dk, mu=mu), MomentumSector(0.0, 0.0, dk)


def test_01_jordan_ep(report):
    p = ModelParams(t=0.0, delta=1.0, mu=1.0)
    core = build_core_matrix(build_sector(p, 0.0), p)
    j, v = jordan_residual(core), coalescing_residual(core)
    assert report(1, "Jordan/EP check", j <= 1e-12 and v <= 1e-12, f"||(h-T)^2||={j:.2e} ||(h-T)(-i,1)||={v:.2e}")


def test_02_projection_oracle(report):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(50):
        p = ModelParams(t=rng.uniform(-2, 2), delta=rng.uniform(-2, 2), mu=rng.uniform(0.05, 3))
        s = build_sector(p, rng.uniform(-math.pi, math.pi))
        const = bool(rng.integers(2))
        ref = project_block(p, s, 40, const)
        got = build_pair_hamiltonian(p, s, 41, const)
        worst = max(worst, np.max(np.abs(ref.diag - got.diag)), np.max(np.abs(ref.upper - got.upper)))
    assert report(2, "projection-oracle equality", worst <= 1e-12, f"max|diff|={worst:.2e} (50 draws, n_max=40)")


def test_03_ground_state_value(report):
    p, s = chain(2.0, 1.0)
    e0 = eigh_tridiagonal(build_pair_hamiltonian(p, s, 2000), n_lowest=1, eigvals_only=True).eigenvalues[0]
    st, e = vacuum_closed_form(p, s, 200)
    r = build_pair_hamiltonian(p, s, 200).residual(st.amplitudes, e)
    exact = 2 * math.sqrt(3) - 4
    ok = abs(e0 + 0.5359) <= 1e-3 and abs(e0 - exact) <= 1e-8 and r <= 1e-8
    assert report(3, "ground-state value", ok, f"E0={e0:.12f} |E0-(2sqrt3-4)|={abs(e0 - exact):.2e} vac residual={r:.2e}")


def test_04_ladder_spacing(report):
    p, s = chain(2.0, 1.0)
    w = eigh_tridiagonal(build_pair_hamiltonian(p, s, 2000), n_lowest=11, eigvals_only=True).eigenvalues
    gap = 4 * math.sqrt(3)
    rel = float(np.max(np.abs(np.diff(w) - gap)) / gap)
    assert report(4, "ladder spacing", rel <= 1e-6, f"max rel gap error={rel:.2e} over 10 gaps")


def test_05_ipr_closed_form(report):
    st, _ = vacuum_closed_form(*chain(2.0, 1.0), 400)
    r = 2 - math.sqrt(3)
    oracle = sum(r ** (4 * l) for l in range(400)) / sum(r ** (2 * l) for l in range(400)) ** 2
    closed = ipr_vacuum_closed_form(2.0, 1.0)
    num = ipr(st)
    ok = abs(closed - oracle) <= 1e-6 and abs(num - oracle) <= 1e-6
    assert report(5, "IPR closed form", ok, f"closed={closed:.10f} geometric={oracle:.10f} numeric={num:.10f}")


def test_06_zero_energy_extended_state(report):
    c = recursive_eigenvector(0.0, 1.0, 500).amplitudes
    p, s = chain(1.0, 2.0)
    best, _ = calibrate_recursion_factor(p, s)
    L = 500
    h = build_barred_hamiltonian(p, s, L)
    res = h.residual(extended_state(p, s, 0.0, L, factor=best).amplitudes, h.diag[0], rows=L - 1)
    ok = c[2] == 0.5 and not np.any(c[1::2]) and res <= 1e-10
    assert report(6, "E=0 extended state", ok, f"c2={c[2].real} odd max={np.max(np.abs(c[1::2]))} "
                                                f"factor={best} residual={res:.2e}")


def _mipr_curve(grid, L, M):
    out = []
    for mu in grid:
        p, s = chain(float(mu), 1.0)
        out.append(mipr(eigh_tridiagonal(build_pair_hamiltonian(p, s, L), n_lowest=M), M).mipr)
    return np.array(out)


def test_07_mipr_transition(report):
    grid = cli.mu_grid(0.2, 2.0, 0.05)
    m = _mipr_curve(grid, 2000, 400)
    at = {round(float(mu), 2): v for mu, v in zip(grid, m)}
    m15_4000 = _mipr_curve([1.5], 4000, 400)[0]
    j = int(np.argmax(np.abs(np.diff(m))))
    mid = (grid[j] + grid[j + 1]) / 2
    stable = abs(at[1.5] - m15_4000) <= 0.05 * m15_4000
    ok = at[0.5] < 0.05 and stable and 0.9 <= grid[j] and grid[j + 1] <= 1.1
    assert report(7, "MIPR transition", ok, f"MIPR(0.5)={at[0.5]:.4f} MIPR(1.5) L2000={at[1.5]:.6f} "
                                            f"L4000={m15_4000:.6f} max jump on [{grid[j]:.2f},{grid[j + 1]:.2f}] "
                                            f"(mid {mid:.3f})")


def test_08_dicke_onset(report):
    errs = {d: abs(onset_mu_c(d) - 2 * d) for d in (0.5, 1.0, 2.0)}
    assert report(8, "Dicke EP onset", max(errs.values()) <= 1e-9,
                  " ".join(f"|mu_c-2*{d}|={e:.1e}" for d, e in errs.items()))


def test_09_dicke_vacua(report):
    p = DickeParams(64, 3.0, 1.0)
    r = {rho: vacuum_annihilation_residual(p, rho) for rho in (1, -1)}
    f = ground_state_fidelity(p)
    ok = max(r.values()) <= 1e-6 and f >= 0.999
    assert report(9, "Dicke vacua", ok, f"residual+={r[1]:.1e} residual-={r[-1]:.1e} fidelity={f:.8f}")


def test_10_quench_phase_signature(report):
    loc = quench_np(DickeParams(64, 3.0, 1.0), "exact_dicke", T=20)
    # N_P(t) does not depend on the window, so one converged run over [0, 20]
    # gives all three time averages
    deloc = quench_np(DickeParams(64, 1.0, 1.0), "exact_dicke", T=20)
    avgs = [deloc.average(T) for T in (5.0, 10.0, 20.0)]
    increasing = bool(avgs[0] < avgs[1] < avgs[2])
    ok = loc.bounded and deloc.bounded and increasing
    assert report(10, "quench phase signature", ok,
                  f"mu=3 bounded={loc.bounded} sup N_P={np.max(loc.n_p):.4f} cutoff={loc.cutoff}; "
                  f"mu=1 cutoff={deloc.cutoff} converged={deloc.bounded} "
                  f"<N_P>_T for T=5,10,20: {avgs[0]:.3f}, {avgs[1]:.3f}, {avgs[2]:.3f}")


def _scan(n_atom, T):
    c = {"delta": 1.0, "mu_from": None, "mu_to": None, "mu_step": None}
    grid = cli.dmu_grid(c)
    return dmu_scan(DickeParams(n_atom, float(grid[0]), 1.0), grid, "exact_dicke", T=T, workers=default_workers())


def test_11_dmu_valley(report):
    t0 = time.perf_counter()
    main = _scan(64, 20.0)
    short = _scan(64, 10.0)
    small = _scan(32, 20.0)
    in_window = 1.8 <= main.argmin <= 2.2
    deeper_t = main.depth > short.depth
    deeper_n = main.depth > small.depth
    ok = in_window and deeper_t and deeper_n and not main.failed
    assert report(11, "D_mu valley", ok,
                  f"argmin(N=64,T=20)={main.argmin:.2f} depth={main.depth:.3f}; depth(T=10)={short.depth:.3f} "
                  f"depth(N=32)={small.depth:.3f}; grid [{main.mu_grid[0]}, {main.mu_grid[-1]}] "
                  f"h={main.h}; {time.perf_counter() - t0:.0f}s")


def test_12_determinism(report, tmp_path):
    workers_max = max(default_workers(), 2)
    args = ["mipr-sweep", "--delta", "1", "--mu-from", "0.2", "--mu-to", "2.0", "--mu-step", "0.05",
            "--trunc", "2000", "--m", "400", "--force", "--no-plot"]
    blobs = []
    for i, w in enumerate((1, workers_max, 1)):
        out = tmp_path / f"run{i}"
        assert cli.main(args + ["--workers", str(w), "--out", str(out)]) == 0
        blobs.append(next(out.glob("mipr-sweep-*/mipr.csv")).read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    assert report(12, "determinism", ok, f"workers 1/{workers_max}/1 CSVs byte-identical={ok} "
                                         f"({len(blobs[0])} bytes)")
