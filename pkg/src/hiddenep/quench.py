"""
Quench from the empty state and the mu-derivative of the time-averaged
photon number.

The initial state is |0>_p |down> for the Dicke model and |0, 0> for the
effective model.  Photon cutoffs are doubled until the N_P(t) trajectory
stops changing; runs that hit the cap are reported as unbounded, which is
the expected outcome on the delocalized side.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from .dicke import (DickeParams, _lowering, build_dicke_hamiltonian, dicke_photon_number,
                    excitation_parity, single_mode_hamiltonian)
from .errors import DomainError, HiddenEPError
from .numerics import propagate
from .parallel import ordered_map

log = logging.getLogger(__name__)

MODELS = ("exact_dicke", "effective")
CUTOFF_CAP = {"exact_dicke": 512, "effective": 1024}
CONVERGENCE_RTOL = 0.01
TAIL_SHELLS = 4


@dataclass
class QuenchSeries:
    times: np.ndarray
    n_p: np.ndarray
    params: DickeParams
    model: str
    cutoff: int
    bounded: bool
    cutoff_history: list = field(default_factory=list)  # (cutoff, sup-norm delta vs previous)
    trailing_weight: Optional[np.ndarray] = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def average(self, T: Optional[float] = None) -> float:
        """(1/T) * integral_0^T N_P dt by the trapezoid rule on the sample grid."""
        T = self.times[-1] if T is None else T
        sel = self.times <= T * (1 + 1e-12)
        return float(trapezoid(self.n_p[sel], self.times[sel]) / T)


@dataclass
class SweepResult:
    mu_grid: np.ndarray
    avg_np: np.ndarray
    d_mu: np.ndarray
    T: float
    h: float
    bounded: np.ndarray
    one_sided: np.ndarray
    errors: list = field(default_factory=list)  # per grid point: None or a message

    @property
    def argmin(self) -> float:
        return float(self.mu_grid[int(np.nanargmin(self.d_mu))])

    @property
    def depth(self) -> float:
        return float(-np.nanmin(self.d_mu))

    @property
    def failed(self) -> bool:
        return any(e is not None for e in self.errors)


def time_grid(T: float, dt: float) -> np.ndarray:
    if not (T > 0 and dt > 0):
        raise DomainError("T and dt must be positive")
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    return np.linspace(0.0, T, n + 1)


def default_dt(mu: float) -> float:
    return 0.02 / mu


# ---------------------------------------------------------------------------
# single runs at fixed cutoff


def _dicke_run(p: DickeParams, times: np.ndarray):
    h = build_dicke_hamiltonian(p, sparse=True)
    keep = np.flatnonzero(excitation_parity(p, "exact_dicke") > 0)
    h = h[keep][:, keep]
    psi0 = np.zeros(len(keep), dtype=complex)
    psi0[0] = 1.0  # |n=0, m=-j> has even parity and index 0
    traj = propagate(h, psi0, times)
    prob = np.abs(traj) ** 2
    nph = dicke_photon_number(p)[keep]
    n_p = prob @ nph
    tail = prob[:, nph > p.n_ph - TAIL_SHELLS].sum(axis=1)
    return n_p, tail


def _mode_run(mu: float, delta: float, rho: int, n: int, times: np.ndarray):
    # h_rho conserves photon parity; the vacuum lives in the even sector
    h = single_mode_hamiltonian(mu, delta, rho, n)
    even = np.arange(0, n + 1, 2)
    h = h[np.ix_(even, even)]
    psi0 = np.zeros(len(even), dtype=complex)
    psi0[0] = 1.0
    traj = propagate(h, psi0, times)
    prob = np.abs(traj) ** 2
    occ = prob @ even.astype(float)
    tail = prob[:, even > n - TAIL_SHELLS].sum(axis=1)
    return occ, tail


def _effective_run(p: DickeParams, times: np.ndarray):
    # |0,0>_ab = |0,0>_d and <d_+^dag d_-> = 0 by parity, so N_P = (n_+ + n_-)/2
    occ_p, tail_p = _mode_run(p.mu, p.delta, 1, p.n_ph, times)
    occ_m, tail_m = _mode_run(p.mu, p.delta, -1, p.n_ph, times)
    return (occ_p + occ_m) / 2, np.maximum(tail_p, tail_m)


def run_fixed_cutoff(p: DickeParams, model: str, times: np.ndarray):
    if model == "exact_dicke":
        return _dicke_run(p, times)
    if model == "effective":
        return _effective_run(p, times)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def effective_np_analytic(p: DickeParams, times) -> np.ndarray:
    """Heisenberg-picture N_P(t) of the effective model from |0, 0>.

    For h = A n + (B/2)(d^2 + d^dag^2) started in the vacuum,
    <n(t)> = B^2 sin^2(w t)/w^2 with w^2 = A^2 - B^2 (sinh for w^2 < 0,
    B^2 t^2 at w = 0).
    """
    t = np.asarray(times, dtype=float)
    total = np.zeros_like(t)
    for rho in (1, -1):
        a, b = p.mu + rho * p.delta, rho * p.delta
        w2 = a * a - b * b
        if w2 > 0:
            w = math.sqrt(w2)
            total += b * b * np.sin(w * t) ** 2 / w2
        elif w2 < 0:
            k = math.sqrt(-w2)
            total += b * b * np.sinh(k * t) ** 2 / -w2
        else:
            total += b * b * t * t
    return total / 2


# ---------------------------------------------------------------------------
# converged runs


def quench_np(p: DickeParams, model: str = "exact_dicke", T: float = 20.0, dt: Optional[float] = None,
              cap: Optional[int] = None, rtol: float = CONVERGENCE_RTOL) -> QuenchSeries:
    """N_P(t) on a uniform grid, doubling the photon cutoff until converged.

    Convergence: sup-norm change between successive cutoffs below ``rtol``
    times the sup of the finer trajectory.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    dt = default_dt(p.mu) if dt is None else dt
    times = time_grid(T, dt)
    cap = CUTOFF_CAP[model] if cap is None else cap
    cutoff = min(p.n_ph, cap)
    prev, history = None, []
    while True:
        q = p.replace(n_ph=cutoff)
        n_p, tail = run_fixed_cutoff(q, model, times)
        delta = None if prev is None else float(np.max(np.abs(n_p - prev)))
        history.append((cutoff, delta))
        scale = max(float(np.max(np.abs(n_p))), 1e-300)
        converged = delta is not None and delta <= rtol * scale
        log.debug("quench %s mu=%g cutoff=%d delta=%s", model, p.mu, cutoff, delta)
        if converged:
            return QuenchSeries(times, n_p, q, model, cutoff, True, history, tail)
        if cutoff >= cap:
            return QuenchSeries(times, n_p, q, model, cutoff, False, history, tail)
        prev = n_p
        cutoff = min(2 * cutoff, cap)


def convergence_report(series: QuenchSeries) -> dict:
    """Diagnostics of a completed run."""
    tw = series.trailing_weight
    return {
        "model": series.model,
        "bounded": series.bounded,
        "final_cutoff": series.cutoff,
        "cutoff_history": [c for c, _ in series.cutoff_history],
        "sup_deltas": [d for _, d in series.cutoff_history],
        "trailing_weight": tw,
        "max_trailing_weight": float(np.max(tw)) if tw is not None else None,
    }


# ---------------------------------------------------------------------------
# D_mu scan


def _avg_point(mu: float, template: DickeParams, model: str, T: float, dt: Optional[float]):
    try:
        s = quench_np(template.replace(mu=mu), model, T, dt)
    except (HiddenEPError, ValueError, MemoryError) as exc:
        return math.nan, False, f"{type(exc).__name__}: {exc}"
    return s.average(), s.bounded, None


def dmu_scan(p_template: DickeParams, mu_grid: Sequence[float], model: str = "exact_dicke",
             T: float = 20.0, dt: Optional[float] = None, h: Optional[float] = None,
             workers: Optional[int] = 1) -> SweepResult:
    """Time-averaged N_P on ``mu_grid`` and its central-difference mu-derivative.

    Every grid point gets two extra runs at mu +- h (h defaults to half the
    grid spacing).  Where mu - h would leave mu > 0 the forward difference
    (mu, mu + h) is used and the point is flagged ``one_sided``.  A failing
    run does not abort the scan: its grid point gets NaN and a message in
    ``errors``.
    """
    mu = np.asarray(mu_grid, dtype=float)
    if len(mu) < 1 or np.any(np.diff(mu) <= 0):
        raise DomainError("mu_grid must be strictly ascending")
    if h is None:
        h = float(np.min(np.diff(mu))) / 2 if len(mu) > 1 else 0.025
    if h <= 0:
        raise DomainError("derivative step h must be positive")
    one_sided = mu - h <= 0
    points = []
    for m, os_ in zip(mu, one_sided):
        points += [m, m if os_ else m - h, m + h]
    res = ordered_map(partial(_avg_point, template=p_template, model=model, T=T, dt=dt), points, workers)
    avg = np.array([r[0] for r in res]).reshape(-1, 3)
    ok = np.array([r[1] for r in res]).reshape(-1, 3)
    msgs = [r[2] for r in res]
    errors = [next((m for m in msgs[3 * i:3 * i + 3] if m), None) for i in range(len(mu))]
    width = np.where(one_sided, h, 2 * h)
    d_mu = (avg[:, 2] - avg[:, 1]) / width
    return SweepResult(mu, avg[:, 0], d_mu, T, h, ok.all(axis=1), one_sided, errors)
