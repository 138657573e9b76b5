"""
Dicke model and its linearized Holstein-Primakoff two-mode reduction.

    H_D   = mu (a^dag a + J_z) + Delta / sqrt(N) (a^dag + a)(J_+ + J_-)
    H_eff = mu (a^dag a + b^dag b) + Delta (a^dag + a)(b^dag + b)

With d_rho = (a + rho b)/sqrt(2) the effective model splits into two
independent single-mode squeezing Hamiltonians

    h_rho = (mu + rho Delta) n_rho + (rho Delta / 2)(d_rho^2 + d_rho^dag 2),

whose frequency sqrt(mu^2 + 2 rho Delta mu) turns imaginary for rho = -
when mu < 2 Delta.  That onset is the exceptional point of the 2x2 Nambu
matrix h_eff^-.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import bisect
from scipy.sparse.linalg import eigsh

from .errors import DomainError, RegimeError, SizeError
from .pair import Basis, StateVector, annihilation_residual

DIM_CAP = 40000
RHOS = (1, -1)

SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


@dataclass(frozen=True)
class DickeParams:
    """Dicke model parameters and Fock cutoffs.

    ``n_ph`` and ``n_b`` are the highest retained occupations of the photon
    and Holstein-Primakoff modes.
    """

    n_atom: int
    mu: float
    delta: float
    n_ph: int = 64
    n_b: int = 64

    def __post_init__(self):
        if int(self.n_atom) != self.n_atom or self.n_atom < 2 or self.n_atom % 2:
            raise DomainError(f"n_atom must be a positive even integer, got {self.n_atom}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DomainError(f"mu must be finite and positive, got {self.mu}")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise DomainError(f"delta must be finite and non-negative, got {self.delta}")
        if self.n_ph < 4 or self.n_b < 4:
            raise SizeError("cutoffs n_ph and n_b must be >= 4")

    def replace(self, **kw) -> "DickeParams":
        d = dict(n_atom=self.n_atom, mu=self.mu, delta=self.delta, n_ph=self.n_ph, n_b=self.n_b)
        d.update(kw)
        return DickeParams(**d)


@dataclass(frozen=True)
class EffectiveModeData:
    """Analytic quantities of the two decoupled modes d_+ and d_-.

    ``eps[(sigma, rho)]`` is (sigma/2) sqrt(mu^2 + 2 rho Delta mu), complex.
    ``tanh_half_theta[rho]`` is None where the mode has no vacuum, and
    ``tanh_half_phi[rho]`` is None where it does.
    """

    eps: dict
    tanh_half_theta: dict
    eta: dict
    tanh_half_phi: dict
    mu_c: float
    h_eff: dict = field(repr=False)
    theta_rule: str = "small_root"

    def theta(self, rho: int) -> Optional[float]:
        x = self.tanh_half_theta[rho]
        return None if x is None else 2 * math.atanh(x)

    def phi(self, rho: int) -> Optional[float]:
        x = self.tanh_half_phi[rho]
        return None if x is None else 2 * math.atanh(x)


# ---------------------------------------------------------------------------
# operators


def _lowering(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n + 1, dtype=float)), 1, shape=(n + 1, n + 1), format="csr")


def spin_ladder(n_atom: int) -> tuple[sp.csr_matrix, np.ndarray]:
    """(J_+, m) for spin n_atom/2 on the basis m = -j..j."""
    j = n_atom / 2
    m = np.arange(-j, j + 1)
    up = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    return sp.diags(up, -1, format="csr"), m


def _check_dim(dim: int, cap: int):
    if dim > cap:
        raise SizeError(f"Hilbert space dimension {dim} exceeds cap {cap}; reduce the cutoffs "
                        "or use the sparse builder with iterative propagation")


def build_dicke_hamiltonian(p: DickeParams, sparse: bool = False, cap: int = DIM_CAP):
    """Dicke Hamiltonian on |n> (x) |m>, index n * (N+1) + (m + N/2)."""
    dim = (p.n_ph + 1) * (p.n_atom + 1)
    _check_dim(dim, cap)
    a = _lowering(p.n_ph)
    jp, m = spin_ladder(p.n_atom)
    n = sp.diags(np.arange(p.n_ph + 1, dtype=float))
    ia = sp.identity(p.n_ph + 1)
    ispin = sp.identity(p.n_atom + 1)
    h = (p.mu * (sp.kron(n, ispin) + sp.kron(ia, sp.diags(m)))
         + p.delta / math.sqrt(p.n_atom) * sp.kron(a + a.T, jp + jp.T))
    h = h.tocsr()
    return h if sparse else h.toarray()


def dicke_photon_number(p: DickeParams) -> np.ndarray:
    """Diagonal of a^dag a on the Dicke product basis."""
    return np.repeat(np.arange(p.n_ph + 1, dtype=float), p.n_atom + 1)


def build_effective_hamiltonian(p: DickeParams, sparse: bool = False, cap: int = DIM_CAP):
    """Effective two-mode Hamiltonian on |n_a> (x) |n_b>, index n_a * (n_b+1) + n_b."""
    dim = (p.n_ph + 1) * (p.n_b + 1)
    _check_dim(dim, cap)
    a, b = _lowering(p.n_ph), _lowering(p.n_b)
    ia, ib = sp.identity(p.n_ph + 1), sp.identity(p.n_b + 1)
    h = (p.mu * (sp.kron(a.T @ a, ib) + sp.kron(ia, b.T @ b))
         + p.delta * sp.kron(a + a.T, b + b.T))
    h = h.tocsr()
    return h if sparse else h.toarray()


def effective_photon_number(p: DickeParams) -> np.ndarray:
    return np.repeat(np.arange(p.n_ph + 1, dtype=float), p.n_b + 1)


def excitation_parity(p: DickeParams, model: str = "effective") -> np.ndarray:
    """Diagonal of (-1)^(total excitations) on the builder's basis."""
    if model == "effective":
        na, nb = np.divmod(np.arange((p.n_ph + 1) * (p.n_b + 1)), p.n_b + 1)
        return (-1.0) ** (na + nb)
    na, mi = np.divmod(np.arange((p.n_ph + 1) * (p.n_atom + 1)), p.n_atom + 1)
    return (-1.0) ** (na + mi)


def single_mode_hamiltonian(mu: float, delta: float, rho: int, n: int) -> np.ndarray:
    """h_rho = (mu + rho Delta) d^dag d + (rho Delta/2)(d^2 + d^dag^2) on 0..n."""
    d = _lowering(n).toarray()
    return (mu + rho * delta) * d.T @ d + rho * delta / 2 * (d @ d + d.T @ d.T)


# ---------------------------------------------------------------------------
# mode split


def h_eff_matrix(mu: float, delta: float, rho: int) -> np.ndarray:
    return (mu + rho * delta) / 2 * SIGMA_Z + rho * 1j * delta / 2 * SIGMA_Y


def _radicand(mu: float, delta: float, rho: int) -> float:
    return mu * mu + 2 * rho * delta * mu


def onset_mu_c(delta: float, xtol: float = 1e-13) -> float:
    """Bisect for the mu where eps_{-} stops being real, using det(h_eff^-).

    h_eff^- is traceless, so its eigenvalues are +-sqrt(-det); they are real
    iff -det >= 0.
    """
    if delta == 0:
        return 0.0

    def real_gap(mu):
        return -np.linalg.det(h_eff_matrix(mu, delta, -1)).real

    lo, hi = 1e-9 * delta, delta
    while real_gap(hi) < 0:
        hi *= 2
    return bisect(real_gap, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def tanh_half_theta_candidates(mu: float, delta: float, rho: int) -> dict:
    """Candidate tanh(theta_rho/2) values for gamma_rho = cosh d + sinh d^dag."""
    w = math.sqrt(_radicand(mu, delta, rho))
    a, b = mu + rho * delta, rho * delta
    printed = 1 - rho * (mu / delta) * (1 + math.sqrt(1 + 2 * rho * delta / mu))
    return {
        "printed": printed,
        "small_root": b / (a + w),
        "large_root": (a + w) / b,
    }


def gamma_matrix(tanh_half: complex, n: int) -> np.ndarray:
    """gamma = cosh(theta/2) d + sinh(theta/2) d^dag, scaled so the d coefficient is 1."""
    d = _lowering(n).toarray()
    return d + tanh_half * d.T


def select_theta_rule(mu: float, delta: float, rho: int, n: int = 80) -> tuple[str, dict]:
    """Score each candidate by how well gamma annihilates the numerical ground state of h_rho."""
    h = single_mode_hamiltonian(mu, delta, rho, n)
    w, v = np.linalg.eigh(h)
    g0 = v[:, 0]
    keep = np.arange(n + 1) < n - 4
    scores = {}
    for name, x in tanh_half_theta_candidates(mu, delta, rho).items():
        scores[name] = annihilation_residual(g0, gamma_matrix(x, n), keep) / math.sqrt(1 + abs(x) ** 2)
    return min(scores, key=scores.get), scores


def mode_split(p: DickeParams) -> EffectiveModeData:
    mu, delta = p.mu, p.delta
    if delta <= 0:
        raise DomainError("mode_split needs delta > 0")
    eps, theta, eta, phi, hm = {}, {}, {}, {}, {}
    for rho in RHOS:
        r = _radicand(mu, delta, rho)
        root = np.sqrt(complex(r))
        for sigma in RHOS:
            eps[(sigma, rho)] = complex(sigma * root / 2) if r < 0 else complex(sigma * root.real / 2)
        hm[rho] = h_eff_matrix(mu, delta, rho)
        if r > 0:
            theta[rho] = tanh_half_theta_candidates(mu, delta, rho)["small_root"]
            eta[rho] = (delta + rho * mu - rho * math.sqrt(r)) / (math.sqrt(2) * delta)
            phi[rho] = None
        else:
            theta[rho] = eta[rho] = None
            phi[rho] = _tanh_half_phi(mu, delta, rho) if r < 0 else None
    return EffectiveModeData(eps, theta, eta, phi, onset_mu_c(delta), hm)


# ---------------------------------------------------------------------------
# localized side: closed-form vacua


def a_coefficients(L: int) -> np.ndarray:
    a = np.ones(max(L, 2))
    for l in range(L - 2):
        a[l + 2] = math.sqrt((2 * l * l + 5 * l + 3) / (2 * l * l + 5 * l + 2)) * a[l + 1] ** 2 / a[l]
    return a[:L]


@dataclass(frozen=True)
class DickeVacuum:
    rho: int
    eta: float
    state: StateVector  # single-mode amplitudes over |n>, n = 0..2L-1
    profile: np.ndarray  # p_rho(l), normalized weights on |2l>

    @property
    def pair_amplitudes(self) -> np.ndarray:
        return self.state.amplitudes[::2]


def _check_localized(p: DickeParams, rho: int):
    if _radicand(p.mu, p.delta, rho) <= 0 or p.delta <= 0:
        raise RegimeError(f"mode d_{'+' if rho > 0 else '-'} has no vacuum at mu={p.mu}, delta={p.delta}")


def dicke_vacuum_closed_form(p: DickeParams, rho: int, L: int = 40) -> DickeVacuum:
    """Vacuum of gamma_rho as sum_l (-eta_rho)^l A_l |2l>.

    The alternating sign makes the state the ground state of h_rho in the
    Fock phase convention of d_rho = (a + rho b)/sqrt(2).
    """
    _check_localized(p, rho)
    eta = mode_split(p).eta[rho]
    l = np.arange(L)
    even = np.power(-eta, l) * a_coefficients(L)
    amps = np.zeros(2 * L, dtype=complex)
    amps[::2] = even
    w = np.abs(even) ** 2
    return DickeVacuum(rho, eta, StateVector(amps, Basis.TWO_MODE), w / w.sum())


def vacuum_annihilation_residual(p: DickeParams, rho: int, L: int = 40, exclude: int = 2) -> float:
    vac = dicke_vacuum_closed_form(p, rho, L)
    n = 2 * L - 1
    x = mode_split(p).tanh_half_theta[rho]
    keep = np.arange(n + 1) < n + 1 - exclude
    return annihilation_residual(vac.state, gamma_matrix(x, n), keep)


def ground_state_product(p: DickeParams, L: Optional[int] = None) -> StateVector:
    """|Vac_+>|Vac_-> expressed on the (n_a, n_b) basis of ``build_effective_hamiltonian``.

    Built by applying polynomials in d_+^dag and d_-^dag to |0, 0>; the
    truncated creation operators only drop amplitude beyond the box.
    """
    for rho in RHOS:
        _check_localized(p, rho)
    L = L if L is not None else min(p.n_ph, p.n_b) // 2
    a, b = _lowering(p.n_ph), _lowering(p.n_b)
    ia, ib = sp.identity(p.n_ph + 1), sp.identity(p.n_b + 1)
    A, B = sp.kron(a, ib, format="csr"), sp.kron(ia, b, format="csr")
    dim = A.shape[0]
    dag = {rho: ((A + rho * B).T / math.sqrt(2)).tocsr() for rho in RHOS}
    vac0 = np.zeros(dim, dtype=complex)
    vac0[0] = 1.0

    def apply(rho, coeffs, start):
        # sum_n coeffs[n] |n>_rho (x) start, via normalized iterates
        out = np.zeros(dim, dtype=complex)
        w = start.copy()
        for n, c in enumerate(coeffs):
            if c != 0:
                out += c * w
            w = dag[rho] @ w / math.sqrt(n + 1)
        return out

    vm = dicke_vacuum_closed_form(p, -1, L).state.amplitudes
    vp = dicke_vacuum_closed_form(p, 1, L).state.amplitudes
    psi = apply(1, vp, apply(-1, vm, vac0))
    return StateVector(psi / np.linalg.norm(psi), Basis.TWO_MODE)


def effective_ground_state(p: DickeParams) -> tuple[float, np.ndarray]:
    h = build_effective_hamiltonian(p, sparse=True)
    w, v = eigsh(h, k=1, which="SA", tol=1e-12)
    return float(w[0]), v[:, 0]


def ground_state_fidelity(p: DickeParams) -> float:
    _, g = effective_ground_state(p)
    return float(abs(np.vdot(g, ground_state_product(p).amplitudes)) ** 2)


# ---------------------------------------------------------------------------
# delocalized side


def _tanh_half_phi(mu: float, delta: float, rho: int) -> float:
    # tanh(phi) = (mu + rho Delta)/(rho Delta); half-angle form is finite at mu = Delta
    x = (mu + rho * delta) / (rho * delta)
    return x / (1 + math.sqrt(1 - x * x))


@dataclass(frozen=True)
class SqueezedForm:
    rho: int
    tanh_half_phi: float
    coefficient: float  # of (A^dag A^dag + A A)
    constant: float
    residual: float  # max |h_rho - coefficient (A^dag^2 + A^2) - constant| on the interior block

    @property
    def phi(self) -> float:
        return 2 * math.atanh(self.tanh_half_phi)


def squeezed_region_form(p: DickeParams, rho: int, n: int = 60, interior: int = 6) -> SqueezedForm:
    """Rewrite h_rho as a pure two-photon term in A_rho = sinh(phi/2) d^dag + cosh(phi/2) d."""
    r = _radicand(p.mu, p.delta, rho)
    if r >= 0 or p.delta <= 0:
        raise RegimeError(f"squeezed form needs mu^2 + 2 rho Delta mu < 0 (mu={p.mu}, delta={p.delta}, rho={rho})")
    x = _tanh_half_phi(p.mu, p.delta, rho)
    phi = 2 * math.atanh(x)
    c, s = math.cosh(phi / 2), math.sinh(phi / 2)
    coef = -0.5 * math.sqrt(-r)
    a_num, b_num = p.mu + rho * p.delta, rho * p.delta
    const = a_num * s * s - b_num * c * s
    d = _lowering(n).toarray()
    A = s * d.T + c * d
    lhs = single_mode_hamiltonian(p.mu, p.delta, rho, n)
    rhs = coef * (A.T @ A.T + A @ A) + const * np.eye(n + 1)
    k = n + 1 - interior
    resid = float(np.max(np.abs(lhs - rhs)[:k, :k]))
    return SqueezedForm(rho, x, coef, const, resid)


def canonical_commutator_residual(tanh_half: float, n: int = 40, interior: int = 2) -> float:
    """max |[A, A^dag] - 1| on the interior for A = sinh d^dag + cosh d."""
    phi = 2 * math.atanh(tanh_half)
    d = _lowering(n).toarray()
    A = math.sinh(phi / 2) * d.T + math.cosh(phi / 2) * d
    com = A @ A.T - A.T @ A - np.eye(n + 1)
    k = n + 1 - interior
    return float(np.max(np.abs(com[:k, :k])))
