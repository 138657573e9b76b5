"""
Equivalent single-particle chains on the BCS-like pair basis.

The block Hamiltonian of the momentum pair (k, -k) conserves boson-number
parity and the momentum imbalance n_k - n_{-k}.  On the zero-imbalance
subspace spanned by

    |l> = (b_k^dag b_{-k}^dag)^l / l! |0, 0> = |l, l>

it acts as a semi-infinite tridiagonal chain with hopping 2 i Delta_k (l+1)
and a linear potential 4 mu l.  This module builds that chain, its closed-form
vacuum, the barred chain of the delocalized regime, and a brute-force
two-mode Fock space used as an independent oracle for all of them.

Sign convention: the pairing term is +i Delta_k b_k^dag b_{-k}^dag, as in the
k-space form of the chain.  The c-number 2 (mu - T_k) that comes from normal
ordering b_{-k} b_{-k}^dag is dropped unless ``include_constant=True``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .core import ModelParams, MomentumSector, Regime, classify
from .errors import ContractError, DomainError, RegimeError, SizeError


class Basis(enum.Enum):
    PAIR = "pair"
    BARRED = "barred"
    PHOTON_SPIN = "photon_spin"
    TWO_MODE = "two_mode"


@dataclass
class StateVector:
    """Amplitudes over a truncated Fock-type basis; normalization not assumed."""

    amplitudes: np.ndarray
    basis: Basis = Basis.PAIR
    _norm: Optional[float] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if not np.all(np.isfinite(self.amplitudes)):
            raise DomainError("state amplitudes must be finite")

    def __len__(self):
        return len(self.amplitudes)

    @property
    def norm(self) -> float:
        if self._norm is None:
            self._norm = float(np.linalg.norm(self.amplitudes))
        return self._norm

    def normalized(self) -> "StateVector":
        if self.norm == 0:
            raise DomainError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / self.norm, self.basis)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Truncated tridiagonal matrix; ``upper[l]`` is the <l+1|H|l> element."""

    diag: np.ndarray
    upper: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        d = np.asarray(self.diag)
        u = np.asarray(self.upper, dtype=complex)
        if d.ndim != 1 or u.shape != (max(len(d) - 1, 0),):
            raise SizeError("upper must have length len(diag) - 1")
        if self.hermitian and np.any(np.abs(np.imag(d)) > 0):
            raise ContractError("Hermitian operator needs a real diagonal")
        object.__setattr__(self, "diag", np.real(d).astype(float) if self.hermitian else d)
        object.__setattr__(self, "upper", u)

    @property
    def length(self) -> int:
        return len(self.diag)

    def to_dense(self) -> np.ndarray:
        h = np.diag(self.diag).astype(complex)
        idx = np.arange(self.length - 1)
        h[idx + 1, idx] = self.upper
        h[idx, idx + 1] = np.conj(self.upper)
        return h

    def to_sparse(self) -> sp.csr_matrix:
        return sp.diags([np.conj(self.upper), self.diag, self.upper], [1, 0, -1], format="csr")

    def matvec(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=complex)
        out = self.diag * c
        out[1:] += self.upper * c[:-1]
        out[:-1] += np.conj(self.upper) * c[1:]
        return out

    def residual(self, c, energy: float, rows: Optional[int] = None) -> float:
        """||(H - E) c|| / ||c|| restricted to the first ``rows`` rows."""
        c = np.asarray(c, dtype=complex)
        r = self.matvec(c) - energy * c
        if rows is not None:
            r = r[:rows]
        return float(np.linalg.norm(r) / np.linalg.norm(c))


# ---------------------------------------------------------------------------
# equivalent chains


def _pair_constant(params: ModelParams, sector: MomentumSector) -> float:
    return 2 * (params.mu - sector.t_k)


def build_pair_hamiltonian(params: ModelParams, sector: MomentumSector, L: int,
                           include_constant: bool = False) -> TridiagonalOperator:
    if L < 2:
        raise SizeError(f"truncation L={L} must be >= 2")
    l = np.arange(L, dtype=float)
    diag = 4 * params.mu * l
    if include_constant:
        diag = diag + _pair_constant(params, sector)
    upper = 2j * sector.delta_k * (l[:-1] + 1)
    return TridiagonalOperator(diag, upper)


def vacuum_energy(params: ModelParams, sector: MomentumSector,
                  include_constant: bool = False) -> float:
    mu, dk = params.mu, sector.delta_k
    if classify(mu, dk) is not Regime.LOCALIZED:
        raise RegimeError(f"vacuum exists only for mu > |Delta_k| (mu={mu}, Delta_k={dk})")
    e = 2 * math.sqrt(mu * mu - dk * dk) - 2 * mu
    return e + _pair_constant(params, sector) if include_constant else e


def vacuum_closed_form(params: ModelParams, sector: MomentumSector, L: int,
                       include_constant: bool = False) -> tuple[StateVector, float]:
    """Geometric vacuum c_l = i^(l+1) q^l of the pair chain, unnormalized.

    q = E_vac / (2 Delta_k) with E_vac the constant-free vacuum energy; |q| < 1
    in the localized regime and |q| -> 1 at the EP.
    """
    e = vacuum_energy(params, sector)
    dk = sector.delta_k
    q = 0.0 if dk == 0 else e / (2 * dk)
    l = np.arange(L)
    amps = (1j ** ((l + 1) % 4)) * np.power(q, l)
    if include_constant:
        e += _pair_constant(params, sector)
    return StateVector(amps, Basis.PAIR), e


def vacuum_decay_ratio(params: ModelParams, sector: MomentumSector) -> float:
    """|c_{l+1} / c_l| of the closed-form vacuum."""
    return abs(vacuum_energy(params, sector)) / (2 * abs(sector.delta_k))


def ladder_energies(params: ModelParams, sector: MomentumSector, n_levels: int,
                    include_constant: bool = False) -> np.ndarray:
    """Levels of the pair chain built on the vacuum by (gamma_k^dag gamma_-k^dag)^n."""
    if n_levels < 1:
        raise DomainError("n_levels must be >= 1")
    e0 = vacuum_energy(params, sector, include_constant)
    gap = 4 * math.sqrt(params.mu ** 2 - sector.delta_k ** 2)
    return e0 + gap * np.arange(n_levels)


def ipr_vacuum_closed_form(mu: float, delta_k: float) -> float:
    return delta_k ** 2 / (mu * mu - mu * math.sqrt(mu * mu - delta_k * delta_k)) - 1


# ---------------------------------------------------------------------------
# delocalized regime


def barred_transform(params: ModelParams, sector: MomentumSector) -> tuple[float, float]:
    """Coefficients (kappa_+, kappa_-) of bar b_k = i kappa_+ b_k^dag + kappa_- b_-k.

    kappa_-^2 - kappa_+^2 = 1.  These diagonalize the number part of the block
    for Delta_k < 0; for Delta_k > 0 the transform that does so uses -kappa_+
    (see ``barred_mode_coefficients``).
    """
    mu, ad = params.mu, abs(sector.delta_k)
    if classify(mu, ad) is not Regime.DELOCALIZED:
        raise RegimeError(f"barred transform needs |Delta_k| > mu (mu={mu}, Delta_k={sector.delta_k})")
    root = (ad * ad - mu * mu) ** 0.25
    a, b = math.sqrt(ad - mu), math.sqrt(ad + mu)
    return (a - b) / (2 * root), (a + b) / (2 * root)


def barred_mode_coefficients(params: ModelParams, sector: MomentumSector) -> tuple[float, float]:
    """(v, u) with bar b_k = i v b_k^dag + u b_-k removing the number term."""
    kp, km = barred_transform(params, sector)
    return -math.copysign(1.0, sector.delta_k) * kp, km


def barred_hopping(params: ModelParams, sector: MomentumSector) -> float:
    """sqrt(Delta_k^2 - mu^2)."""
    barred_transform(params, sector)
    return math.sqrt(sector.delta_k ** 2 - params.mu ** 2)


def build_barred_hamiltonian(params: ModelParams, sector: MomentumSector, L: int,
                             include_constant: bool = False) -> TridiagonalOperator:
    """Pair chain rewritten on the barred pair basis: pure hopping, flat potential.

    The diagonal is -2 mu (or -2 T_k with the normal-ordering constant), and
    the hopping is 2 i sign(Delta_k) sqrt(Delta_k^2 - mu^2) (l+1).
    """
    if L < 2:
        raise SizeError(f"truncation L={L} must be >= 2")
    g = barred_hopping(params, sector)
    d0 = -2 * params.mu
    if include_constant:
        d0 += _pair_constant(params, sector)
    l = np.arange(L, dtype=float)
    upper = 2j * math.copysign(g, sector.delta_k) * (l[:-1] + 1)
    return TridiagonalOperator(np.full(L, d0), upper)


def recursive_eigenvector(energy: float, hopping_scale: float, L: int) -> StateVector:
    """Generalized eigenvector of the flat barred chain by forward recursion.

    ``energy`` is measured from the chain's constant diagonal and
    ``hopping_scale`` is the modulus of the l=0 hopping amplitude.
    """
    if not hopping_scale > 0:
        raise DomainError(f"hopping_scale must be positive, got {hopping_scale}")
    c = np.zeros(L, dtype=complex)
    c[0] = 1.0
    if L > 1:
        c[1] = 1j * energy / hopping_scale
    for l in range(1, L - 1):
        c[l + 1] = (l * hopping_scale * c[l - 1] + 1j * energy * c[l]) / ((l + 1) * hopping_scale)
    return StateVector(c, Basis.BARRED)


RECURSION_FACTOR = 2.0


def calibrate_recursion_factor(params: ModelParams, sector: MomentumSector,
                               energy: float = 0.7, L: int = 200,
                               candidates: Sequence[float] = (0.5, 1.0, 2.0, 4.0)) -> tuple[float, dict]:
    """Pick the multiple of sqrt(Delta_k^2 - mu^2) used as recursion scale.

    Each candidate is scored by the eigen-residual of the recursion output
    against ``build_barred_hamiltonian``; E = 0 cannot discriminate, so a
    nonzero energy is used.
    """
    hbar = build_barred_hamiltonian(params, sector, L)
    d0 = hbar.diag[0]
    g = barred_hopping(params, sector)
    scores = {}
    for f in candidates:
        c = extended_state(params, sector, energy, L, factor=f).amplitudes
        scores[f] = hbar.residual(c, energy + d0, rows=L - 1)
    return min(scores, key=scores.get), scores


def extended_state(params: ModelParams, sector: MomentumSector, energy: float, L: int,
                   factor: float = RECURSION_FACTOR) -> StateVector:
    """Recursion output for the barred chain of this sector (energy relative to its diagonal)."""
    g = barred_hopping(params, sector)
    st = recursive_eigenvector(energy, factor * g, L)
    if sector.delta_k < 0:
        # the Delta_k < 0 chain is the complex conjugate of the Delta_k > 0 one
        st = StateVector(np.conj(st.amplitudes), Basis.BARRED)
    return st


def crossbasis_matrix_element(l: int, lp: int, kappa_plus: float, kappa_minus: float,
                              form: str = "exact") -> complex:
    """<l| (bar b_k^dag bar b_-k^dag - bar b_k bar b_-k) |l'> on the unbarred pair basis.

    ``form="exact"`` is the matrix element of the operator built from
    bar b_k = i kappa_+ b_k^dag + kappa_- b_-k.  ``form="printed"`` is the
    shorter expression (kp^2 + km^2)(l d_{l,l'-1} - l' d_{l,l'+1}) - 4i km kp l d_{l,l'},
    kept for comparison; it does not match the operator.
    """
    if l < 0 or lp < 0:
        raise DomainError("pair indices must be non-negative")
    s = kappa_plus ** 2 + kappa_minus ** 2
    pk = kappa_plus * kappa_minus
    if form == "exact":
        return complex(s * (l * (l == lp + 1) - lp * (l == lp - 1)) - 2j * pk * (2 * l + 1) * (l == lp))
    if form == "printed":
        return complex(s * (l * (l == lp - 1) - lp * (l == lp + 1)) - 4j * pk * l * (l == lp))
    raise ValueError(f"unknown form {form!r}")


# ---------------------------------------------------------------------------
# two-mode oracle


class TwoModeFockSpace:
    """Truncated Fock space of the modes (k, -k), occupations 0..n_max each.

    Basis index of |n_k, n_-k> is n_k * (n_max + 1) + n_-k.  All operators
    are sparse CSR matrices.
    """

    def __init__(self, n_max: int):
        if n_max < 2:
            raise SizeError("n_max must be >= 2")
        self.n_max = n_max
        d = n_max + 1
        self.dimension = d * d
        a = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, format="csr")
        eye = sp.identity(d, format="csr")
        self.b_k = sp.kron(a, eye, format="csr")
        self.b_mk = sp.kron(eye, a, format="csr")
        num = sp.diags(np.arange(d, dtype=float))
        self.n_k = sp.kron(num, eye, format="csr")
        self.n_mk = sp.kron(eye, num, format="csr")
        self.identity = sp.identity(self.dimension, format="csr")

    def index(self, n_k: int, n_mk: int) -> int:
        return n_k * (self.n_max + 1) + n_mk

    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.n_max + 1
        i = np.arange(self.dimension)
        return i // d, i % d

    def interior_mask(self, shells: int = 1) -> np.ndarray:
        """True on states with both occupations below n_max + 1 - shells."""
        nk, nmk = self.occupations()
        lim = self.n_max + 1 - shells
        return (nk < lim) & (nmk < lim)

    def parity(self) -> sp.csr_matrix:
        nk, nmk = self.occupations()
        return sp.diags((-1.0) ** (nk + nmk), format="csr")

    def momentum(self, k: float) -> sp.csr_matrix:
        return (k * (self.n_k - self.n_mk)).tocsr()

    def block_hamiltonian(self, params: ModelParams, sector: MomentumSector,
                          include_constant: bool = False) -> sp.csr_matrix:
        """2[(mu+T) n_k + (mu-T) b_-k b_-k^dag + i Delta_k b_k^dag b_-k^dag + h.c.]."""
        mu, t, dk = params.mu, sector.t_k, sector.delta_k
        bb_dag = self.n_mk + (self.identity if include_constant else 0 * self.identity)
        pair = self.b_k.T @ self.b_mk.T
        h = 2 * ((mu + t) * self.n_k + (mu - t) * bb_dag + 1j * dk * pair - 1j * dk * pair.T)
        return h.tocsr()

    def pair_state(self, l: int) -> np.ndarray:
        v = np.zeros(self.dimension, dtype=complex)
        v[self.index(l, l)] = 1.0
        return v

    def embed_pair(self, amplitudes) -> np.ndarray:
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if len(amplitudes) > self.n_max + 1:
            raise SizeError("pair state longer than the Fock truncation")
        v = np.zeros(self.dimension, dtype=complex)
        for l, c in enumerate(amplitudes):
            v[self.index(l, l)] = c
        return v

    def pair_projector(self, L: Optional[int] = None) -> sp.csr_matrix:
        L = self.n_max + 1 if L is None else L
        rows = [self.index(l, l) for l in range(L)]
        return sp.csr_matrix((np.ones(L), (rows, np.arange(L))), shape=(self.dimension, L))

    # Bogoliubov modes

    def gamma_modes(self, theta: complex) -> dict:
        """gamma_{+-k} and their bar partners for Bogoliubov angle theta."""
        s, c = np.sinh(theta / 2), np.cosh(theta / 2)
        bk, bmk = self.b_k, self.b_mk
        return {
            "gamma_k": (1j * s * bk.T + c * bmk).tocsr(),
            "gammabar_k": (-1j * s * bk + c * bmk.T).tocsr(),
            "gamma_mk": (1j * s * bmk.T + c * bk).tocsr(),
            "gammabar_mk": (-1j * s * bmk + c * bk.T).tocsr(),
        }

    def barred_modes(self, v: float, u: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """bar b_k = i v b_k^dag + u b_-k and bar b_-k = i v b_-k^dag + u b_k."""
        bbk = (1j * v * self.b_k.T + u * self.b_mk).tocsr()
        bbmk = (1j * v * self.b_mk.T + u * self.b_k).tocsr()
        return bbk, bbmk

    def barred_vacuum(self, v: float, u: float) -> np.ndarray:
        """Normalized common vacuum of both barred modes: sum (-i v/u)^n |n, n>."""
        ratio = -1j * v / u
        amps = ratio ** np.arange(self.n_max + 1)
        vec = self.embed_pair(amps)
        return vec / np.linalg.norm(vec)

    def barred_pair_states(self, v: float, u: float, L: int) -> np.ndarray:
        """Columns |l bar> = (bar b_k^dag bar b_-k^dag)^l / l! |bar 0>, l < L."""
        bbk, bbmk = self.barred_modes(v, u)
        raise_op = (bbk.conj().T @ bbmk.conj().T).tocsr()
        out = np.zeros((self.dimension, L), dtype=complex)
        vec = self.barred_vacuum(v, u)
        for l in range(L):
            out[:, l] = vec
            vec = raise_op @ vec / (l + 1)
        return out


def project_block(params: ModelParams, sector: MomentumSector, n_max: int,
                  include_constant: bool = False) -> TridiagonalOperator:
    """Brute-force projection of the two-mode block onto the pair basis.

    Also checks that the projection is tridiagonal to 1e-12.
    """
    space = TwoModeFockSpace(n_max)
    h = space.block_hamiltonian(params, sector, include_constant)
    p = space.pair_projector()
    m = (p.T @ h @ p).toarray()
    off = m - np.triu(np.tril(m, 1), -1)
    if np.max(np.abs(off), initial=0.0) > 1e-12:
        raise ContractError("projected block is not tridiagonal")
    idx = np.arange(n_max)
    return TridiagonalOperator(np.real(np.diag(m)), m[idx + 1, idx])


def annihilation_residual(state, mode_matrix, keep: Optional[np.ndarray] = None) -> float:
    """||gamma |psi>|| / ||psi||, with output rows outside ``keep`` discarded."""
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    if mode_matrix.shape[1] != psi.shape[0]:
        raise SizeError(f"mode matrix {mode_matrix.shape} does not act on a state of length {psi.shape[0]}")
    out = mode_matrix @ psi
    if keep is not None:
        out = out[keep]
    return float(np.linalg.norm(out) / np.linalg.norm(psi))
