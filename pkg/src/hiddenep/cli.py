"""
Command-line interface.

    hiddenep spectrum --mu 2 --delta 1 --t 0 --k 0 --trunc 2000
    hiddenep vacuum-profile --mu 2 --delta 1 --trunc 30
    hiddenep mipr-sweep --delta 1 --mu-from 0.2 --mu-to 2.0 --mu-step 0.05 --trunc 2000 --m 400
    hiddenep dicke-quench --n-atom 64 --delta 1 --mu 1,2,3 --T 20
    hiddenep dmu-scan --delta 1 --n-atom 64 --T 20
    hiddenep validate

Options may also come from a flat ``key = value`` file given by ``--config``;
flags on the command line win.  Outputs go under ``--out``, else
``$HIDDENEP_OUTPUT``, else ``./hiddenep-out``.  Errors are reported on
stderr as one JSON line and give a nonzero exit status.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import store
from .core import ModelParams, build_core_matrix, build_sector, coalescing_residual, jordan_residual, spectral_decompose
from .dicke import (DickeParams, ground_state_fidelity, onset_mu_c, vacuum_annihilation_residual)
from .errors import HiddenEPError
from .numerics import eigh_tridiagonal, mipr
from .pair import (RECURSION_FACTOR, TwoModeFockSpace, annihilation_residual, build_barred_hamiltonian,
                   build_pair_hamiltonian, calibrate_recursion_factor, extended_state, project_block,
                   recursive_eigenvector, vacuum_closed_form)
from .parallel import default_workers, ordered_map
from .quench import MODELS, dmu_scan, quench_np

log = logging.getLogger("hiddenep")

COMMANDS = ("spectrum", "vacuum-profile", "mipr-sweep", "dicke-quench", "dmu-scan", "validate")
EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 2, 3

# D_mu window centred on the Dicke EP mu_c = 2 Delta, in units of Delta
DMU_WINDOW = (1.5, 2.5, 0.05)

# options that do not change the payload and so stay out of the hash
_NON_PHYSICAL = {"command", "config", "out", "workers", "force", "no_plot", "verbose"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict
    out: Path
    workers: int = 1
    force: bool = False
    plot: bool = True

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        d = vars(ns)
        params = {k: v for k, v in sorted(d.items()) if k not in _NON_PHYSICAL}
        workers = d.get("workers") or default_workers()
        return cls(ns.command, params, store.output_root(d.get("out")), workers,
                   bool(d.get("force")), not d.get("no_plot"))


@dataclass
class Outcome:
    payloads: dict
    summary: dict = field(default_factory=dict)
    failed: bool = False


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hiddenep", description="Hidden exceptional points of quadratic bosonic Hamiltonians.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--out", help="output root (default $HIDDENEP_OUTPUT or ./hiddenep-out)")
        sp.add_argument("--force", action="store_true", help="recompute even on a cache hit")
        sp.add_argument("--no-plot", action="store_true", help="skip writing the plot script")
        sp.add_argument("-v", "--verbose", action="store_true")

    def chain(sp):
        sp.add_argument("--delta", type=float, default=1.0)
        sp.add_argument("--t", type=float, default=0.0)
        sp.add_argument("--k", type=float, default=0.0)
        sp.add_argument("--include-constant", action="store_true",
                        help="keep the normal-ordering constant 2(mu - T_k) on the diagonal")

    s = sub.add_parser("spectrum", help="lowest eigenvalues of the pair chain")
    s.add_argument("--mu", type=float, default=2.0)
    chain(s)
    s.add_argument("--trunc", type=int, default=2000)
    s.add_argument("--n-eigs", type=int, default=20)
    common(s)

    s = sub.add_parser("vacuum-profile", help="closed-form vacuum or extended-state amplitudes")
    s.add_argument("--mu", type=float, default=2.0)
    chain(s)
    s.add_argument("--trunc", type=int, default=30)
    s.add_argument("--energy", type=float, default=0.0,
                   help="energy above the barred diagonal for the delocalized recursion")
    common(s)

    s = sub.add_parser("mipr-sweep", help="MIPR of the lowest m eigenstates against mu")
    chain(s)
    s.add_argument("--mu-from", type=float, default=0.2)
    s.add_argument("--mu-to", type=float, default=2.0)
    s.add_argument("--mu-step", type=float, default=0.05)
    s.add_argument("--trunc", type=_ints, default=[2000], help="one or more truncations, comma separated")
    s.add_argument("--m", type=int, default=400)
    s.add_argument("--workers", type=int)
    common(s)

    s = sub.add_parser("dicke-quench", help="N_P(t) after a quench from the empty state")
    s.add_argument("--n-atom", type=int, default=64)
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--mu", type=_floats, default=[3.0], help="one or more mu values, comma separated")
    s.add_argument("--T", type=float, default=20.0)
    s.add_argument("--dt", type=float, help="time step (default 0.02/mu)")
    s.add_argument("--model", choices=MODELS, default="exact_dicke")
    s.add_argument("--n-ph", type=int, default=64, help="starting photon cutoff")
    s.add_argument("--workers", type=int)
    common(s)

    s = sub.add_parser("dmu-scan", help="D_mu, the mu-derivative of the time-averaged N_P")
    s.add_argument("--n-atom", type=int, default=64)
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--T", type=float, default=20.0)
    s.add_argument("--dt", type=float)
    s.add_argument("--mu-from", type=float, help=f"default {DMU_WINDOW[0]} * delta")
    s.add_argument("--mu-to", type=float, help=f"default {DMU_WINDOW[1]} * delta")
    s.add_argument("--mu-step", type=float, help=f"default {DMU_WINDOW[2]} * delta")
    s.add_argument("--h", type=float, help="derivative step (default half the grid step)")
    s.add_argument("--model", choices=MODELS, default="exact_dicke")
    s.add_argument("--n-ph", type=int, default=64, help="starting photon cutoff")
    s.add_argument("--workers", type=int)
    common(s)

    s = sub.add_parser("validate", help="run the oracle suite")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-v", "--verbose", action="store_true")
    return p


def read_config(path) -> list[tuple[str, str]]:
    """Parse a flat key = value file; '#' starts a comment."""
    items = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{n}: expected key = value")
            items.append((key.strip().replace("_", "-"), value.strip()))
    return items


def _config_argv(sub: argparse.ArgumentParser, items) -> list[str]:
    flags = {a.dest.replace("_", "-"): a for a in sub._actions if a.option_strings}
    argv = []
    for key, value in items:
        act = flags.get(key)
        if act is None or key == "config":
            raise UsageError(f"unknown config key {key!r}")
        if act.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
        else:
            argv += [f"--{key}", value]
    return argv


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if getattr(ns, "config", None):
        sub = parser._subparsers._group_actions[0].choices[ns.command]
        file_argv = _config_argv(sub, read_config(ns.config))
        # later occurrences win in argparse, so command-line flags override the file
        ns = parser.parse_args([ns.command] + file_argv + list(argv[1:]))
    return ns


# ---------------------------------------------------------------------------
# per-command work


def _chain_params(c: dict, mu: float) -> tuple[ModelParams, object]:
    p = ModelParams(t=c["t"], delta=c["delta"], mu=mu)
    return p, build_sector(p, c["k"])


def mu_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid rounded to 12 decimals so both ends are hit exactly."""
    if not step > 0 or stop < start:
        raise UsageError(f"bad mu grid from={start} to={stop} step={step}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return np.round(start + step * np.arange(n + 1), 12)


def run_spectrum(c: dict, workers: int) -> Outcome:
    p, s = _chain_params(c, c["mu"])
    n = min(c["n_eigs"], c["trunc"])
    w = eigh_tridiagonal(build_pair_hamiltonian(p, s, c["trunc"], c["include_constant"]),
                         n_lowest=n, eigvals_only=True).eigenvalues
    text = store.csv_text("spectrum", enumerate(w.tolist()), {"mu": c["mu"], "trunc": c["trunc"]})
    return Outcome({"spectrum.csv": text}, {"ground": float(w[0])})


def run_vacuum_profile(c: dict, workers: int) -> Outcome:
    p, s = _chain_params(c, c["mu"])
    regime = spectral_decompose(build_core_matrix(s, p)).regime.value
    if p.mu > abs(s.delta_k):
        st, e = vacuum_closed_form(p, s, c["trunc"], c["include_constant"])
        kind = "vacuum"
    else:
        st = extended_state(p, s, c["energy"], c["trunc"])
        e = c["energy"] + build_barred_hamiltonian(p, s, 2, c["include_constant"]).diag[0]
        kind = "extended"
    a = st.normalized().amplitudes
    rows = [(l, float(x.real), float(x.imag)) for l, x in enumerate(a)]
    text = store.csv_text("vacuum-profile", rows, {"kind": kind, "energy": e, "regime": regime})
    return Outcome({"profile.csv": text}, {"kind": kind, "energy": float(e)})


def _mipr_point(task, c: dict):
    mu, L = task
    try:
        p, s = _chain_params(c, mu)
        dec = eigh_tridiagonal(build_pair_hamiltonian(p, s, L), n_lowest=c["m"])
        return mipr(dec, c["m"]).mipr, None
    except (HiddenEPError, ValueError) as exc:
        return math.nan, f"{type(exc).__name__}: {exc}"


def run_mipr_sweep(c: dict, workers: int) -> Outcome:
    grid = mu_grid(c["mu_from"], c["mu_to"], c["mu_step"])
    tasks = [(float(mu), int(L)) for L in c["trunc"] for mu in grid]
    res = ordered_map(partial(_mipr_point, c=c), tasks, workers)
    rows = [(mu, L, c["m"], v) for (mu, L), (v, _) in zip(tasks, res)]
    errs = [(mu, L, e) for (mu, L), (_, e) in zip(tasks, res) if e]
    payloads = {"mipr.csv": store.csv_text("mipr-sweep", rows, {"delta": c["delta"], "k": c["k"], "t": c["t"]})}
    summary = {}
    for L in c["trunc"]:
        v = np.array([r[3] for r in rows if r[1] == L])
        if len(v) > 1 and np.all(np.isfinite(v)):
            j = int(np.argmax(np.abs(np.diff(v))))
            summary[f"max_jump_L{L}"] = [float(grid[j]), float(grid[j + 1])]
    if errs:
        payloads["errors.csv"] = store.csv_text("mipr-sweep", errs, columns=("mu", "trunc", "error"))
    return Outcome(payloads, summary, bool(errs))


def _quench_point(mu: float, c: dict):
    try:
        p = DickeParams(c["n_atom"], mu, c["delta"], n_ph=c["n_ph"])
        s = quench_np(p, c["model"], c["T"], c["dt"])
        return s.times, s.n_p, s.bounded, s.cutoff, None
    except (HiddenEPError, ValueError, MemoryError) as exc:
        return None, None, False, None, f"{type(exc).__name__}: {exc}"


def run_dicke_quench(c: dict, workers: int) -> Outcome:
    mus = list(c["mu"])
    if len(set(mus)) != len(mus):
        raise UsageError("duplicate mu values")
    res = ordered_map(partial(_quench_point, c=c), mus, workers)
    payloads, summary, errs = {}, {"runs": []}, []
    for i, (mu, (t, n_p, bounded, cutoff, err)) in enumerate(zip(mus, res)):
        name = "quench.csv" if len(mus) == 1 else f"quench_{i:03d}.csv"
        if err:
            errs.append((mu, err))
            continue
        meta = {"mu": mu, "bounded": bounded, "cutoff": cutoff, "model": c["model"], "n_atom": c["n_atom"]}
        payloads[name] = store.csv_text("dicke-quench", zip(t.tolist(), n_p.tolist()), meta)
        summary["runs"].append({"mu": mu, "file": name, "bounded": bool(bounded), "cutoff": int(cutoff)})
    if errs:
        payloads["errors.csv"] = store.csv_text("dicke-quench", errs, columns=("mu", "error"))
    return Outcome(payloads, summary, bool(errs))


def dmu_grid(c: dict) -> np.ndarray:
    d = c["delta"]
    if d <= 0 and None in (c["mu_from"], c["mu_to"], c["mu_step"]):
        raise UsageError("the default D_mu window scales with delta; give --mu-from/--mu-to/--mu-step")
    start = c["mu_from"] if c["mu_from"] is not None else DMU_WINDOW[0] * d
    stop = c["mu_to"] if c["mu_to"] is not None else DMU_WINDOW[1] * d
    step = c["mu_step"] if c["mu_step"] is not None else DMU_WINDOW[2] * d
    return mu_grid(start, stop, step)


def run_dmu_scan(c: dict, workers: int) -> Outcome:
    grid = dmu_grid(c)
    tmpl = DickeParams(c["n_atom"], float(grid[0]), c["delta"], n_ph=c["n_ph"])
    r = dmu_scan(tmpl, grid, c["model"], c["T"], c["dt"], c["h"], workers)
    rows = [(mu, a, dm, bool(b)) for mu, a, dm, b in zip(r.mu_grid.tolist(), r.avg_np.tolist(),
                                                         r.d_mu.tolist(), r.bounded)]
    finite = np.isfinite(r.d_mu)
    meta = {"T": c["T"], "n_atom": c["n_atom"], "h": r.h, "model": c["model"]}
    summary = {}
    if finite.any():
        meta["argmin_mu"] = r.argmin
        summary = {"argmin_mu": r.argmin, "depth": r.depth}
    payloads = {"dmu.csv": store.csv_text("dmu-scan", rows, meta)}
    errs = [(mu, e) for mu, e in zip(r.mu_grid.tolist(), r.errors) if e]
    if errs:
        payloads["errors.csv"] = store.csv_text("dmu-scan", errs, columns=("mu", "error"))
    return Outcome(payloads, summary, bool(errs))


RUNNERS: dict[str, Callable[[dict, int], Outcome]] = {
    "spectrum": run_spectrum,
    "vacuum-profile": run_vacuum_profile,
    "mipr-sweep": run_mipr_sweep,
    "dicke-quench": run_dicke_quench,
    "dmu-scan": run_dmu_scan,
}


def check_params(cfg: RunConfig):
    """Validate physical parameters before any heavy work starts."""
    c = cfg.params
    if cfg.command in ("spectrum", "vacuum-profile"):
        _chain_params(c, c["mu"])
        if c["trunc"] < 2:
            raise UsageError("trunc must be >= 2")
    elif cfg.command == "mipr-sweep":
        for mu in mu_grid(c["mu_from"], c["mu_to"], c["mu_step"]):
            _chain_params(c, float(mu))
        if c["m"] < 1 or any(c["m"] > L for L in c["trunc"]):
            raise UsageError(f"m={c['m']} must lie in 1..min(trunc)")
    elif cfg.command in ("dicke-quench", "dmu-scan"):
        mus = c["mu"] if cfg.command == "dicke-quench" else dmu_grid(c)
        for mu in mus:
            DickeParams(c["n_atom"], float(mu), c["delta"], n_ph=c["n_ph"])
        if not c["T"] > 0 or (c["dt"] is not None and not c["dt"] > 0):
            raise UsageError("T and dt must be positive")


def run(cfg: RunConfig) -> tuple[int, Optional[store.ResultRecord]]:
    """Execute one command; returns (exit status, record)."""
    check_params(cfg)
    if not cfg.force:
        hit = store.cache_lookup(cfg.out, cfg.command, cfg.params)
        if hit is not None:
            log.info("cache hit %s", hit.run_dir)
            return EXIT_OK, hit
    t0 = time.perf_counter()
    outcome = RUNNERS[cfg.command](cfg.params, cfg.workers)
    rec = store.ResultRecord.new(cfg.command, cfg.params)
    rec.summary = dict(outcome.summary, seconds=round(time.perf_counter() - t0, 3))
    rec.status = "partial" if outcome.failed else "ok"
    store.commit(rec, outcome.payloads, cfg.out)
    if cfg.plot and any(n != "errors.csv" for n in outcome.payloads):
        try:
            store.emit_plot_script(rec)
        except (FileNotFoundError, ValueError) as exc:
            log.warning("no plot script: %s", exc)
    return (EXIT_FAILED if outcome.failed else EXIT_OK), rec


# ---------------------------------------------------------------------------
# oracle suite


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _check_jordan():
    p = ModelParams(t=0.0, delta=1.0, mu=1.0)
    core = build_core_matrix(build_sector(p, 0.0), p)
    j, v = jordan_residual(core), coalescing_residual(core)
    return j <= 1e-12 and v <= 1e-12, f"jordan={j:.2e} coalescing={v:.2e}"


def _check_projection(builder, seed: int, draws: int = 12, n_max: int = 20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        p = ModelParams(t=rng.uniform(-2, 2), delta=rng.uniform(-2, 2), mu=rng.uniform(0.05, 3))
        s = build_sector(p, rng.uniform(-math.pi, math.pi))
        ref = project_block(p, s, n_max)
        got = builder(p, s, n_max + 1)
        worst = max(worst, np.max(np.abs(ref.diag - got.diag)), np.max(np.abs(ref.upper - got.upper)))
    return worst <= 1e-12, f"max|diff|={worst:.2e} over {draws} draws"


def _check_pair_vacuum(builder):
    p = ModelParams(t=0.3, delta=1.0, mu=2.0)
    s = build_sector(p, 0.0)
    st, e = vacuum_closed_form(p, s, 200)
    r_chain = builder(p, s, 200).residual(st.amplitudes, e, rows=199)
    space = TwoModeFockSpace(40)
    st2, _ = vacuum_closed_form(p, s, 41)
    th = spectral_decompose(build_core_matrix(s, p)).theta_k
    g = space.gamma_modes(th)
    psi = space.embed_pair(st2.amplitudes)
    keep = space.interior_mask()
    r_mode = max(annihilation_residual(psi, g[k], keep) for k in ("gamma_k", "gamma_mk"))
    return r_chain <= 1e-8 and r_mode <= 1e-10, f"chain={r_chain:.2e} gamma={r_mode:.2e}"


def _check_recursion():
    c0 = recursive_eigenvector(0.0, 1.0, 12).amplitudes
    p = ModelParams(t=0.0, delta=2.0, mu=1.0)
    s = build_sector(p, 0.0)
    best, scores = calibrate_recursion_factor(p, s)
    L = 500
    hb = build_barred_hamiltonian(p, s, L)
    worst = 0.0
    for e in (0.0, 0.7, -1.3):
        st = extended_state(p, s, e, L)
        worst = max(worst, hb.residual(st.amplitudes, e + hb.diag[0], rows=L - 1))
    ok = c0[2] == 0.5 and not np.any(c0[1::2]) and best == RECURSION_FACTOR and worst <= 1e-10
    return ok, f"c2={c0[2].real} factor={best} residual={worst:.2e}"


def _check_onset():
    errs = [abs(onset_mu_c(d) - 2 * d) for d in (0.5, 1.0, 2.0)]
    return max(errs) <= 1e-9, f"max|mu_c - 2 delta|={max(errs):.2e}"


def _check_dicke_vacua():
    p = DickeParams(64, 3.0, 1.0)
    r = max(vacuum_annihilation_residual(p, rho) for rho in (1, -1))
    f = ground_state_fidelity(p)
    return r <= 1e-6 and f >= 0.999, f"annihilation={r:.2e} fidelity={f:.6f}"


def _check_hp_fidelity():
    worst = 0.0
    for n in (32, 64):
        p = DickeParams(n, 3.0, 1.0)
        a = quench_np(p, "exact_dicke", T=5 / p.mu)
        b = quench_np(p, "effective", T=5 / p.mu)
        worst = max(worst, float(np.max(np.abs(a.n_p - b.n_p)) / np.max(np.abs(b.n_p))))
    return worst <= 0.1, f"max relative deviation={worst:.3f} (mu=3, t<=5/mu)"


def validate(pair_builder: Callable = build_pair_hamiltonian, seed: int = 0, stream=None) -> list[Check]:
    """Run the oracle suite, print one PASS/FAIL line per check and return them.

    ``pair_builder`` replaces the pair-chain builder under test, which lets a
    deliberately broken builder be fed in.
    """
    stream = sys.stdout if stream is None else stream
    suite = [
        ("ep-jordan", _check_jordan),
        ("projection-equality", partial(_check_projection, pair_builder, seed)),
        ("pair-vacuum-residuals", partial(_check_pair_vacuum, pair_builder)),
        ("recursion-residuals", _check_recursion),
        ("ep-onset-bisection", _check_onset),
        ("dicke-vacua", _check_dicke_vacua),
        ("hp-fidelity", _check_hp_fidelity),
    ]
    out = []
    for name, fn in suite:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream, flush=True)
    return out


# ---------------------------------------------------------------------------


def _error_line(kind: str, message: str, command: Optional[str] = None) -> str:
    return json.dumps({"error": kind, "command": command, "message": " ".join(str(message).split())})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = argv[0] if argv and argv[0] in COMMANDS else None
    try:
        ns = parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if ns.command == "validate":
            checks = validate(seed=ns.seed)
            return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED
        cfg = RunConfig.from_namespace(ns)
        status, rec = run(cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(_error_line("UsageError", exc, command), file=sys.stderr)
        return EXIT_USAGE
    except (HiddenEPError, ValueError) as exc:
        print(_error_line(type(exc).__name__, exc, command), file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(_error_line("OSError", exc, command), file=sys.stderr)
        return EXIT_FAILED
    for p in rec.payload_paths():
        print(p)
    if status != EXIT_OK:
        print(_error_line("PartialFailure", f"see {Path(rec.run_dir) / 'errors.csv'}", command), file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
