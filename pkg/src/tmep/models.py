"""Open-system builders: a small system coupled to finite spin-chain reservoirs.

Reservoirs are transverse-field Ising chains held at their own inverse
temperatures.  All couplings are real in the distinguished product basis, so
entrywise conjugation is a time reversal fixing both the Hamiltonian and the
reference state, and the fluctuation identities that need time-reversal
invariance apply to every built model.  Chain length is the knob that scales
toward the thermodynamic limit.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DensityMatrix,
    HermitianMatrix,
    kron,
    matrix_log,
    complex_propagator,
    spectral_decompose,
)

__all__ = [
    "DIMENSION_CAP",
    "DIMENSION_CAP_ENV",
    "ResourceLimitError",
    "ReservoirSpec",
    "SystemModel",
    "OpenSystemModel",
    "pauli_x",
    "pauli_y",
    "pauli_z",
    "tfi_chain",
    "gibbs",
    "kron_density",
    "maximally_mixed",
    "build_open_system",
    "two_level_system",
    "canonical_two_level",
    "canonical_open_system",
    "product_state",
    "perturbed_reservoir_state",
    "kms_check",
    "EnergyBalanceReport",
    "entropy_decomposition_check",
    "random_pure_state",
    "random_mixed_state",
    "random_hermitian",
    "random_real_system",
]

DIMENSION_CAP = 4096
DIMENSION_CAP_ENV = "TMEP_DIM_CAP"

pauli_x = np.array([[0.0, 1.0], [1.0, 0.0]])
pauli_y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
pauli_z = np.array([[1.0, 0.0], [0.0, -1.0]])


class ResourceLimitError(RuntimeError):
    """The requested model exceeds the configured dimension cap."""


def _effective_cap(cap: int | None) -> int:
    if cap is not None:
        return int(cap)
    return int(os.environ.get(DIMENSION_CAP_ENV, DIMENSION_CAP))


@dataclass(frozen=True)
class ReservoirSpec:
    """One finite reservoir: an Ising chain in a transverse field at inverse temperature beta."""

    chain_length: int
    beta: float
    coupling_j: float = 1.0
    field_h: float = 1.0

    def __post_init__(self) -> None:
        if self.chain_length < 1:
            raise ValueError("chain_length must be at least 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def dim(self) -> int:
        return 2**self.chain_length


def _site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    factors = [np.eye(2)] * n
    factors[site] = op
    return kron(*factors)


def tfi_chain(n: int, coupling_j: float = 1.0, field_h: float = 1.0) -> HermitianMatrix:
    """Open transverse-field Ising chain: J sum sx_i sx_{i+1} + h sum sz_i."""
    if n < 1:
        raise ValueError("need at least one site")
    h_mat = np.zeros((2**n, 2**n))
    for i in range(n):
        h_mat += field_h * _site_operator(pauli_z, i, n).real
    for i in range(n - 1):
        h_mat += coupling_j * (_site_operator(pauli_x, i, n) @ _site_operator(pauli_x, i + 1, n)).real
    return HermitianMatrix(h_mat)


def gibbs(H: HermitianMatrix, beta: float) -> DensityMatrix:
    """Gibbs state e^{-beta H} / Z, overflow-guarded by shifting the spectrum.

    The state carries its eigendecomposition: the Boltzmann weights inherit
    the relative accuracy of the energy levels, so even weights far below
    machine epsilon stay meaningful for logarithms and fractional powers.
    """
    w, v = H.eig()
    shift = float(w.min()) if beta >= 0 else float(w.max())
    weights = np.exp(-beta * (w - shift))
    weights /= weights.sum()
    state = DensityMatrix((v * weights) @ v.conj().T)
    order = np.argsort(weights, kind="stable")
    state.seed_eig(weights[order], v[:, order], exact=True)
    return state


def kron_density(*factors: DensityMatrix) -> DensityMatrix:
    """Tensor product of states carrying the product eigendecomposition.

    Eigenvalues multiply and eigenvectors tensorize.  The result is marked
    spectrum-exact when every factor either is exact itself or is well
    conditioned, which is what keeps deep product Gibbs states faithful
    below the absolute resolution of a fresh diagonalization.
    """
    if not factors:
        raise ValueError("need at least one factor")
    w_total = None
    v_total = None
    exact = True
    for f in factors:
        w, v = f.eig()
        exact = exact and (f.spectrum_exact or f.min_eigenvalue() > 1e-6)
        w_total = w if w_total is None else np.kron(w_total, w)
        v_total = v if v_total is None else np.kron(v_total, v)
    state = DensityMatrix(kron(*(f.entries for f in factors)))
    order = np.argsort(w_total, kind="stable")
    state.seed_eig(w_total[order], v_total[:, order], exact=exact)
    return state


def maximally_mixed(dim: int) -> DensityMatrix:
    state = DensityMatrix(np.eye(dim) / dim)
    state.seed_eig(np.full(dim, 1.0 / dim), np.eye(dim), exact=True)
    return state


@dataclass
class SystemModel:
    """Minimal closed description a checker needs: a Hamiltonian, a faithful reference, identity."""

    hamiltonian: HermitianMatrix
    reference: DensityMatrix
    fingerprint: str
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim


@dataclass
class OpenSystemModel(SystemModel):
    """Assembled small-system-plus-reservoirs model.

    ``factor_dims`` lists the tensor factors as [dim_s, dim_1, ..., dim_M].
    ``reservoir_energies`` are the freely embedded chain Hamiltonians, and
    ``reservoir_states`` the Gibbs factors making up the reference together
    with the maximally mixed system factor.
    """

    dim_s: int = 2
    h_s: HermitianMatrix | None = None
    reservoirs: tuple[ReservoirSpec, ...] = ()
    coupling_strength: float = 0.5
    free_hamiltonian: HermitianMatrix | None = None
    reservoir_hamiltonians: tuple[HermitianMatrix, ...] = ()
    reservoir_energies: tuple[HermitianMatrix, ...] = ()
    reservoir_states: tuple[DensityMatrix, ...] = ()

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return (self.dim_s,) + tuple(r.dim for r in self.reservoirs)

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(r.beta for r in self.reservoirs)


def _fingerprint(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_open_system(
    dim_s: int,
    reservoirs: list[ReservoirSpec] | tuple[ReservoirSpec, ...],
    coupling_strength: float = 0.5,
    level_splitting: float = 1.0,
    dimension_cap: int | None = None,
) -> OpenSystemModel:
    """Assemble H = H_S + sum_j H_j + lambda sum_j V_j with the product reference state.

    The system Hamiltonian is an evenly spaced ladder, each coupling V_j is a
    real exchange term between the system and the first site of chain j, and
    the reference is maximally mixed on the system times the per-reservoir
    Gibbs states.  The total dimension must stay at or below the cap (default
    4096, overridable with the TMEP_DIM_CAP environment variable).
    """
    reservoirs = tuple(reservoirs)
    if dim_s < 2:
        raise ValueError("system dimension must be at least 2")
    if not reservoirs:
        raise ValueError("need at least one reservoir")
    total = dim_s * int(np.prod([r.dim for r in reservoirs]))
    cap = _effective_cap(dimension_cap)
    if total > cap:
        raise ResourceLimitError(f"model needs dimension {total}, above the cap {cap}")

    dims = [dim_s] + [r.dim for r in reservoirs]
    h_s = HermitianMatrix(level_splitting * np.diag(np.arange(dim_s, dtype=float)))
    chain_hams = tuple(tfi_chain(r.chain_length, r.coupling_j, r.field_h) for r in reservoirs)
    chain_states = tuple(gibbs(hj, r.beta) for hj, r in zip(chain_hams, reservoirs))

    def embed(op: np.ndarray, factor: int) -> np.ndarray:
        pieces = [np.eye(d, dtype=complex) for d in dims]
        pieces[factor] = op
        return kron(*pieces)

    free = embed(h_s.entries, 0)
    embedded_energies = []
    for j, hj in enumerate(chain_hams):
        e = embed(hj.entries, j + 1)
        embedded_energies.append(HermitianMatrix(e))
        free = free + e

    # system-to-first-site exchange coupling, real in the product basis
    sys_x = np.zeros((dim_s, dim_s))
    sys_x[0, 1] = sys_x[1, 0] = 1.0
    full = free.copy()
    for j, r in enumerate(reservoirs):
        site_x = _site_operator(pauli_x, 0, r.chain_length)
        pieces = [np.eye(d, dtype=complex) for d in dims]
        pieces[0] = sys_x
        pieces[j + 1] = site_x
        full = full + coupling_strength * kron(*pieces)

    omega = kron_density(maximally_mixed(dim_s), *chain_states)
    params = {
        "kind": "open-system",
        "dim_s": dim_s,
        "level_splitting": level_splitting,
        "coupling_strength": coupling_strength,
        "reservoirs": [
            {"chain_length": r.chain_length, "beta": r.beta, "coupling_j": r.coupling_j, "field_h": r.field_h}
            for r in reservoirs
        ],
    }
    return OpenSystemModel(
        hamiltonian=HermitianMatrix(full),
        reference=omega,
        fingerprint=_fingerprint(params),
        params=params,
        dim_s=dim_s,
        h_s=h_s,
        reservoirs=reservoirs,
        coupling_strength=coupling_strength,
        free_hamiltonian=HermitianMatrix(free),
        reservoir_hamiltonians=chain_hams,
        reservoir_energies=tuple(embedded_energies),
        reservoir_states=chain_states,
    )


def two_level_system(omega_diag, hamiltonian) -> SystemModel:
    """A bare two-level (or n-level) system from a diagonal reference and a Hamiltonian."""
    diag = np.asarray(omega_diag, dtype=float)
    h = np.asarray(hamiltonian)
    params = {
        "kind": "two-level",
        "omega_diag": diag.tolist(),
        "hamiltonian": [[float(x.real) for x in row] for row in h],
    }
    return SystemModel(
        hamiltonian=HermitianMatrix(h),
        reference=DensityMatrix(np.diag(diag)),
        fingerprint=_fingerprint(params),
        params=params,
    )


def canonical_two_level() -> SystemModel:
    """The standing two-level regression example: omega = diag(3/4, 1/4), H = sigma_x."""
    return two_level_system([0.75, 0.25], pauli_x)


def canonical_open_system(
    chain_length: int = 1, coupling_strength: float = 0.5, **kwargs
) -> OpenSystemModel:
    """The standing open-system example: two single-parameter chains at beta 1 and 2."""
    return build_open_system(
        dim_s=2,
        reservoirs=[
            ReservoirSpec(chain_length=chain_length, beta=1.0),
            ReservoirSpec(chain_length=chain_length, beta=2.0),
        ],
        coupling_strength=coupling_strength,
        **kwargs,
    )


def product_state(model: OpenSystemModel, nu_s: DensityMatrix) -> DensityMatrix:
    """nu_S tensor the reservoir part of the reference."""
    if nu_s.dim != model.dim_s:
        raise ValueError(f"system state dim {nu_s.dim} does not match dim_s {model.dim_s}")
    return kron_density(nu_s, *model.reservoir_states)


def perturbed_reservoir_state(
    model: OpenSystemModel,
    nu_s: DensityMatrix,
    reservoir: int,
    beta_prime: float,
) -> DensityMatrix:
    """Product state with one reservoir locally out of equilibrium.

    The chosen reservoir's Gibbs factor is replaced by a state whose first
    site thermalizes at beta_prime while the remainder of the chain stays at
    the reservoir temperature (with the bond to the first site cut).  The
    perturbation is localized at the chain end that couples to the system.
    """
    if not 0 <= reservoir < len(model.reservoirs):
        raise ValueError(f"reservoir index {reservoir} out of range")
    spec = model.reservoirs[reservoir]
    site = gibbs(HermitianMatrix(spec.field_h * pauli_z), beta_prime)
    if spec.chain_length == 1:
        replaced = site
    else:
        rest = gibbs(tfi_chain(spec.chain_length - 1, spec.coupling_j, spec.field_h), spec.beta)
        replaced = kron_density(site, rest)
    factors = [nu_s] + list(model.reservoir_states)
    factors[reservoir + 1] = replaced
    return kron_density(*factors)


def kms_check(
    nu: DensityMatrix,
    H: HermitianMatrix,
    beta: float,
    A: np.ndarray,
    B: np.ndarray,
    t: float,
) -> float:
    """Residual of the equilibrium boundary condition nu(A B_{t+i beta}) = nu(B_t A)."""
    z = t + 1j * beta
    b_shift = complex_propagator(H, z) @ np.asarray(B, dtype=complex) @ complex_propagator(H, -z)
    b_real = complex_propagator(H, t) @ np.asarray(B, dtype=complex) @ complex_propagator(H, -t)
    lhs = np.trace(nu.entries @ np.asarray(A, dtype=complex) @ b_shift)
    rhs = np.trace(nu.entries @ b_real @ np.asarray(A, dtype=complex))
    return float(abs(lhs - rhs))


@dataclass
class EnergyBalanceReport:
    """Outcome of checking entropy steps against weighted reservoir energy steps."""

    residual: float
    checked_pairs: int
    skipped_clusters: list[tuple[int, str]]

    @property
    def clean(self) -> bool:
        return not self.skipped_clusters


def entropy_decomposition_check(
    model: OpenSystemModel,
    jd,
    *,
    prob_floor: float = 1e-12,
    energy_tol: float = 1e-9,
) -> EnergyBalanceReport:
    """Check -log l_b + log l_a = sum_j beta_j (E_j(b) - E_j(a)) on the outcome table.

    Reservoir energies per cluster are read off the reference eigenbasis; a
    cluster that accidentally merges different joint energy vectors is
    flagged and skipped rather than failing the identity.
    """
    res = spectral_decompose(model.reference)
    k = len(res.values)
    n_res = len(model.reservoirs)
    energies = np.empty((k, n_res))
    skipped: list[tuple[int, str]] = []
    good = np.ones(k, dtype=bool)
    for a, s in enumerate(res.slices):
        cols = res.basis[:, s]
        for j, h_emb in enumerate(model.reservoir_energies):
            block = cols.conj().T @ h_emb.entries @ cols
            e_mean = float(np.trace(block).real) / (s.stop - s.start)
            spread = float(np.max(np.abs(block - e_mean * np.eye(s.stop - s.start))))
            scale = max(1.0, h_emb.spectral_norm())
            if spread > 1e-8 * scale:
                good[a] = False
                skipped.append((a, f"reservoir {j} energy spread {spread:.3e} inside cluster"))
                break
            energies[a, j] = e_mean

    logs = np.log(res.values)
    betas = np.asarray(model.betas)
    weighted = energies @ betas
    entropy_step = (-logs)[:, None] + logs[None, :]
    energy_step = weighted[:, None] - weighted[None, :]
    mask = (jd.probs > prob_floor) & good[:, None] & good[None, :]
    checked = int(mask.sum())
    residual = float(np.max(np.abs(entropy_step - energy_step)[mask])) if checked else 0.0
    return EnergyBalanceReport(residual=residual, checked_pairs=checked, skipped_clusters=skipped)


def random_pure_state(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Haar-distributed pure state."""
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    z /= np.linalg.norm(z)
    return DensityMatrix(np.outer(z, z.conj()))


def random_mixed_state(dim: int, rng: np.random.Generator, *, real: bool = False) -> DensityMatrix:
    """Full-rank state induced from a square Ginibre block."""
    g = rng.standard_normal((dim, dim))
    if not real:
        g = g + 1j * rng.standard_normal((dim, dim))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_hermitian(dim: int, rng: np.random.Generator, *, real: bool = False, norm: float = 1.0) -> HermitianMatrix:
    g = rng.standard_normal((dim, dim))
    if not real:
        g = g + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (g + g.conj().T)
    h_wrapped = HermitianMatrix(h)
    scale = h_wrapped.spectral_norm()
    return HermitianMatrix(h * (norm / scale)) if scale > 0 else h_wrapped


def random_real_system(dim: int, rng: np.random.Generator, tag: str = "") -> SystemModel:
    """Random time-reversal invariant pair (H, omega), both real in the distinguished basis.

    The reference is a Gibbs state of a second norm-bounded random Hamiltonian,
    so its condition number stays below e^5 and identities involving the
    inverse state remain resolvable at machine precision.
    """
    h = random_hermitian(dim, rng, real=True, norm=1.0)
    omega = gibbs(random_hermitian(dim, rng, real=True, norm=2.5), 1.0)
    params = {"kind": "random-real", "dim": dim, "tag": tag}
    return SystemModel(hamiltonian=h, reference=omega, fingerprint=_fingerprint(params), params=params)
