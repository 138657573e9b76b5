"""
Hidden exceptional points of quadratic bosonic Hamiltonians.

Subpackages are flat modules:

core      2x2 Nambu core matrix, regime classification, EP locus
pair      pair-basis chains, closed-form vacua and a two-mode Fock oracle
numerics  tridiagonal eigensolver, propagator, IPR / MIPR
dicke     Dicke model and its two-mode effective Hamiltonian
quench    quench dynamics and the D_mu scan
store     CSV payloads, result records, cache and plot scripts
cli       command-line entry point
"""

from .core import (CoreMatrix, ModelParams, MomentumSector, Regime, SpectralData, build_core_matrix,
                   build_sector, classify, coalescing_residual, ep_locus, jordan_residual,
                   spectral_decompose)
from .dicke import DickeParams, build_dicke_hamiltonian, build_effective_hamiltonian, mode_split, onset_mu_c
from .errors import ContractError, DomainError, HiddenEPError, RegimeError, SizeError
from .numerics import eigh_tridiagonal, ipr, mipr, propagate
from .pair import (StateVector, TridiagonalOperator, build_barred_hamiltonian, build_pair_hamiltonian,
                   vacuum_closed_form)
from .quench import dmu_scan, quench_np

__version__ = "0.1.0"
