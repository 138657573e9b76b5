"""
Momentum-block core matrices of the Hermitian bosonic Kitaev chain.

Each momentum pair (k, -k) of the chain decouples into a block whose Nambu
coefficient matrix

    h_k = [[mu, i*Delta_k], [i*Delta_k, -mu]] + T_k

is non-Hermitian although the block Hamiltonian itself is Hermitian.  The
matrix becomes a Jordan block at mu = |Delta_k|; that point separates a
regime with real quasiparticle energies (normalizable vacuum) from one with
purely imaginary energies (no vacuum).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

EP_RTOL = 1e-10

# right eigenvector of h_k - T_k at the exceptional point mu = Delta_k
COALESCING_VECTOR = np.array([-1j, 1.0])


class Regime(enum.Enum):
    LOCALIZED = "localized"
    EP = "ep"
    DELOCALIZED = "delocalized"


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the bosonic Kitaev chain.

    Attributes
    ----------
    t : float
        Hopping amplitude.
    delta : float
        Pairing amplitude.
    mu : float
        Chemical potential, strictly positive.
    n_sites : int
        Number of lattice sites N (periodic chain).
    """

    t: float
    delta: float
    mu: float
    n_sites: int = 1

    def __post_init__(self):
        for name in ("t", "delta", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.mu <= 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise DomainError(f"n_sites must be a positive integer, got {self.n_sites}")


@dataclass(frozen=True)
class MomentumSector:
    k: float
    t_k: float
    delta_k: float

    def consistent_with(self, params: ModelParams, atol: float = 1e-14) -> bool:
        return (abs(self.t_k - params.t * math.sin(self.k)) <= atol
                and abs(self.delta_k - params.delta * math.cos(self.k)) <= atol)


@dataclass(frozen=True)
class CoreMatrix:
    entries: np.ndarray

    @property
    def t_k(self) -> float:
        return float(np.real(self.entries[0, 0] + self.entries[1, 1]) / 2)

    @property
    def mu(self) -> float:
        return float(np.real(self.entries[0, 0] - self.entries[1, 1]) / 2)

    @property
    def delta_k(self) -> float:
        return float(np.imag(self.entries[0, 1]))

    def shifted(self) -> np.ndarray:
        """h_k - T_k * identity."""
        return self.entries - self.t_k * np.eye(2)


@dataclass(frozen=True)
class SpectralData:
    """Quasiparticle data of one momentum block.

    ``eps_plus`` follows the Nambu convention: twice the eigenvalue splitting
    half-width of ``h_k``.  ``theta_k`` is ``None`` at the exceptional point.
    """

    eps_plus: complex
    eps_minus: complex
    theta_k: Optional[complex]
    is_ep: bool
    regime: Regime


def build_sector(params: ModelParams, k: float) -> MomentumSector:
    if not (-math.pi < k <= math.pi):
        raise DomainError(f"k={k} outside the principal range (-pi, pi]")
    return MomentumSector(k=k, t_k=params.t * math.sin(k), delta_k=params.delta * math.cos(k))


def build_core_matrix(sector: MomentumSector, params: ModelParams) -> CoreMatrix:
    mu, dk = params.mu, sector.delta_k
    h = np.array([[mu, 1j * dk], [1j * dk, -mu]], dtype=complex)
    return CoreMatrix(h + sector.t_k * np.eye(2))


def classify(mu: float, delta_k: float, rtol: float = EP_RTOL) -> Regime:
    ad = abs(delta_k)
    if abs(mu - ad) <= rtol * max(mu, ad):
        return Regime.EP
    return Regime.LOCALIZED if mu > ad else Regime.DELOCALIZED


def spectral_decompose(core: CoreMatrix, rtol: float = EP_RTOL) -> SpectralData:
    """Quasiparticle energies, Bogoliubov angle and regime of a core matrix."""
    mu, dk = core.mu, core.delta_k
    regime = classify(mu, dk, rtol)
    if regime is Regime.EP:
        return SpectralData(0j, 0j, None, True, regime)
    half = np.sqrt(complex(mu * mu - dk * dk))
    eps = 2 * half
    if dk == 0:
        theta = 0j
    else:
        # the angle uses the raw 2x2 eigenvalue, eps/2
        theta = 2 * np.arctanh(complex((mu - half) / dk))
    if regime is Regime.LOCALIZED:
        eps, theta = complex(eps.real, 0.0), complex(theta.real, 0.0)
    else:
        eps = complex(0.0, eps.imag)
    return SpectralData(eps, -eps, theta, False, regime)


def jordan_residual(core: CoreMatrix) -> float:
    """Spectral norm of (2 (h_k - T_k))^2.

    The factor 2 is the Nambu prefactor of the block Hamiltonian, so the
    value equals 4 |mu^2 - Delta_k^2| and vanishes only at the EP.
    """
    m = 2 * core.shifted()
    return float(np.linalg.norm(m @ m, ord=2))


def coalescing_residual(core: CoreMatrix) -> float:
    """Norm of (h_k - T_k) applied to the coalescing vector (-i, 1)."""
    return float(np.linalg.norm(core.shifted() @ COALESCING_VECTOR))


def ep_locus(params: ModelParams, grid: int = 64, rtol: float = EP_RTOL) -> list[float]:
    """Momenta in (-pi, pi] where mu = |Delta cos k|.

    Roots are bracketed on a grid that contains every extremum of |cos k|
    (so each cell is monotone), then refined by Brent's method.  The
    tangent case mu = |Delta| yields k = 0 and k = pi.
    """
    if grid < 2:
        raise DomainError("grid must be >= 2")
    mu, d = params.mu, abs(params.delta)
    if mu > d and classify(mu, d, rtol) is not Regime.EP:
        return []

    def f(k):
        return d * abs(math.cos(k)) - mu

    ks = np.union1d(np.linspace(-math.pi, math.pi, grid),
                    [-math.pi, -math.pi / 2, 0.0, math.pi / 2, math.pi])
    roots = []
    if classify(mu, d, rtol) is Regime.EP:
        roots += [0.0, math.pi]
    else:
        vals = [f(k) for k in ks]
        for a, b, fa, fb in zip(ks[:-1], ks[1:], vals[:-1], vals[1:]):
            if fa == 0.0:
                roots.append(float(a))
            elif fa * fb < 0:
                roots.append(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        if vals[-1] == 0.0:
            roots.append(float(ks[-1]))
    out = sorted({round(math.pi if k <= -math.pi else k, 14) for k in roots})
    checked = []
    for k in out:
        sector = build_sector(params, k)
        dk = sector.delta_k
        # refined roots sit within a few ulps of the EP
        if abs(mu - abs(dk)) <= max(rtol, 1e-12) * max(mu, abs(dk)):
            checked.append(k)
    return checked
