"""
Numerical kernels: Hermitian tridiagonal eigensolver, time propagation and
localization statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import jv

from .errors import ContractError, DomainError, SizeError
from .pair import Basis, StateVector, TridiagonalOperator

DENSE_CAP = 1500

SORT_RULE = "ascending real eigenvalue of the Hermitian equivalent Hamiltonian"


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns

    def __len__(self):
        return len(self.eigenvalues)

    def state(self, i: int) -> StateVector:
        return StateVector(self.eigenvectors[:, i], Basis.PAIR)


@dataclass(frozen=True)
class IPRReport:
    per_state_ipr: np.ndarray
    mipr: float
    n_states: int
    sort_rule: str = SORT_RULE


def gauge_phases(T: TridiagonalOperator) -> np.ndarray:
    """Unit phases u_l with conj(u_{l+1}) * upper[l] * u_l real and >= 0.

    For a purely imaginary upper diagonal with positive imaginary part this
    is u_l = i^l.
    """
    phases = np.ones(T.length, dtype=complex)
    for l, h in enumerate(T.upper):
        a = abs(h)
        phases[l + 1] = phases[l] * (h / a if a > 0 else 1.0)
    return phases


def eigh_tridiagonal(T: TridiagonalOperator, n_lowest: Optional[int] = None,
                     eigvals_only: bool = False) -> EigenDecomposition:
    """Eigenpairs of a Hermitian tridiagonal operator, ascending.

    The operator is gauged to a real symmetric tridiagonal matrix by a
    diagonal phase transform, solved by LAPACK, and the eigenvectors are
    rotated back.  ``n_lowest`` restricts the solve to the lowest pairs.
    """
    if not T.hermitian:
        raise ContractError("eigh_tridiagonal needs a Hermitian operator")
    u = gauge_phases(T)
    d = np.asarray(T.diag, dtype=float)
    e = np.abs(T.upper)
    kw = {}
    if n_lowest is not None:
        if not 1 <= n_lowest <= T.length:
            raise SizeError(f"n_lowest={n_lowest} outside 1..{T.length}")
        kw = dict(select="i", select_range=(0, n_lowest - 1))
    if eigvals_only:
        w = sla.eigh_tridiagonal(d, e, eigvals_only=True, **kw)
        return EigenDecomposition(w, np.empty((T.length, 0)))
    w, v = sla.eigh_tridiagonal(d, e, **kw)
    return EigenDecomposition(w, u[:, None] * v)


def eigh_dense(T: TridiagonalOperator) -> EigenDecomposition:
    """Reference path: dense complex Hermitian diagonalization."""
    w, v = np.linalg.eigh(T.to_dense())
    return EigenDecomposition(w, v)


def _uniform_step(times: np.ndarray) -> Optional[float]:
    if len(times) < 2:
        return None
    steps = np.diff(times)
    if np.allclose(steps, steps[0], rtol=1e-12, atol=0):
        return float(steps[0])
    return None


def spectral_bounds(H) -> tuple[float, float]:
    """Gershgorin interval containing the spectrum of a Hermitian matrix."""
    hs = sp.csr_matrix(H)
    d = np.real(hs.diagonal())
    radius = np.asarray(abs(hs).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - radius)), float(np.max(d + radius))


def chebyshev_step(H, dt: float, tol: float = 1e-15):
    """Return a function applying exp(-i H dt) by a Chebyshev expansion.

    The expansion is fixed once for the step: with the spectrum inside
    [c - r, c + r], exp(-i H dt) = exp(-i c dt) sum_k a_k T_k((H - c)/r),
    a_k = (2 - delta_k0) (-i)^k J_k(r dt).
    """
    hs = sp.csr_matrix(H)
    lo, hi = spectral_bounds(hs)
    c, r = (hi + lo) / 2, max((hi - lo) / 2, 1e-12)
    z = r * dt
    kmax = int(z + 10 * z ** (1 / 3) + 20)
    coef = jv(np.arange(kmax + 1), z)
    keep = np.flatnonzero(np.abs(coef) > tol * 1e-2)
    kmax = int(keep[-1]) + 1 if len(keep) else 1
    a = (2.0 * (-1j) ** np.arange(kmax + 1)) * jv(np.arange(kmax + 1), z)
    a[0] /= 2
    phase = np.exp(-1j * c * dt)
    hn = ((hs - c * sp.identity(hs.shape[0], format="csr")) / r).tocsr()

    def step(v):
        t0, t1 = v, hn @ v
        acc = a[0] * t0 + a[1] * t1
        for k in range(2, kmax + 1):
            t0, t1 = t1, 2 * (hn @ t1) - t0
            acc += a[k] * t1
        return phase * acc

    return step


def propagate(H, psi0, times: Sequence[float], cap: int = DENSE_CAP,
              method: str = "auto") -> np.ndarray:
    """psi(t) = exp(-i H t) psi0 sampled at ``times``; rows are time samples.

    ``method="dense"`` uses a full eigendecomposition (exact at every sample).
    ``method="chebyshev"`` takes fixed Chebyshev steps between samples and
    renormalizes after each; ``method="krylov"`` does the same with
    ``scipy.sparse.linalg.expm_multiply``.  ``"auto"`` is dense up to ``cap``
    and Chebyshev above it.
    """
    psi0 = psi0.amplitudes if isinstance(psi0, StateVector) else np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise DomainError("initial state must be normalized")
    times = np.asarray(times, dtype=float)
    dim = H.shape[0]
    if method == "auto":
        method = "dense" if dim <= cap else "chebyshev"
    if method == "dense":
        if dim > cap:
            raise SizeError(f"dimension {dim} exceeds dense cap {cap}; use an iterative method")
        hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, v = np.linalg.eigh(hd)
        c = v.conj().T @ psi0
        out = (v @ (np.exp(-1j * np.outer(w, times)) * c[:, None])).T
        out[times == 0] = psi0
        return out
    if method not in ("chebyshev", "krylov"):
        raise ValueError(f"unknown method {method!r}")
    hs = sp.csr_matrix(H)
    dt = _uniform_step(times)
    steppers = {}

    def advance(v, tau):
        if method == "krylov":
            return expm_multiply((-1j * tau) * hs, v)
        key = round(tau, 15)
        if key not in steppers:
            steppers[key] = chebyshev_step(hs, tau)
        return steppers[key](v)

    out = np.empty((len(times), dim), dtype=complex)
    cur, tcur = psi0, 0.0
    for i, t in enumerate(times):
        if t != tcur:
            tau = dt if (dt is not None and i > 0 and abs(t - tcur - dt) < 1e-12 * max(1.0, t)) else t - tcur
            cur = advance(cur, tau)
            cur = cur / np.linalg.norm(cur)
            tcur = t
        out[i] = cur
    return out


def ipr(state) -> float:
    """sum |c|^4 / (sum |c|^2)^2."""
    c = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    p = np.abs(c) ** 2
    s = p.sum()
    if s == 0:
        raise DomainError("IPR of the zero vector is undefined")
    return float((p ** 2).sum() / s ** 2)


def ipr_columns(vectors: np.ndarray) -> np.ndarray:
    p = np.abs(vectors) ** 2
    return (p ** 2).sum(axis=0) / p.sum(axis=0) ** 2


def mipr(decomp: EigenDecomposition, M: int) -> IPRReport:
    """Mean IPR of the M lowest-energy eigenstates."""
    if M < 1:
        raise DomainError("M must be >= 1")
    if M > len(decomp):
        raise SizeError(f"M={M} exceeds the {len(decomp)} available eigenpairs")
    order = np.argsort(decomp.eigenvalues, kind="stable")[:M]
    vals = ipr_columns(decomp.eigenvectors[:, order])
    return IPRReport(vals, float(vals.mean()), M)
