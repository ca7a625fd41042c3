"""Two-times measurement statistics of entropy production.

The protocol: measure -log omega projectively, evolve for time t under H,
measure again.  The induced joint outcome distribution and the resulting
entropy production measure Q admit several independent computational routes
(direct enumeration, a trace formula for the characteristic function, the
spectral measure of a relative modular operator, and a cocycle product), all
of which must agree to high precision on finite systems.  Keeping the routes
separate is the point: their agreement is the verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    DEFAULT_CLUSTER_TOL,
    DensityMatrix,
    FaithfulnessError,
    HermitianMatrix,
    SpectralResolution,
    fractional_power,
    propagator,
    spectral_decompose,
)
from .measures import ATOM_MERGE_TOL, AtomicMeasure, cf_eval
from .modular import StandardVector, dephase, evolve_state

__all__ = [
    "NumericalIntegrityError",
    "JointDistribution",
    "CharFunctionGrid",
    "joint_distribution",
    "ep_measure",
    "protocol_measure",
    "char_function_trace",
    "ep_measure_spectral",
    "char_function_cocycle_product",
    "char_function_grid",
]


class NumericalIntegrityError(RuntimeError):
    """A computed probability table violated positivity or normalization."""


@dataclass
class JointDistribution:
    """Joint outcome table p(b, a): first measurement a, second measurement b.

    Rows index the second outcome, columns the first; ``values`` are the
    cluster eigenvalues of the reference state shared by both measurements.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        k = len(self.values)
        if p.shape != (k, k):
            raise ValueError(f"probability table shape {p.shape} does not match alphabet size {k}")
        self.probs = p

    @property
    def alphabet_size(self) -> int:
        return len(self.values)

    def first_marginal(self) -> np.ndarray:
        """p_nu(a) = tr(nu P_a), the distribution of the first outcome."""
        return self.probs.sum(axis=0)

    def second_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=1)


@dataclass
class CharFunctionGrid:
    """Characteristic-function samples along one computational route."""

    alphas: np.ndarray
    values: np.ndarray
    route: str

    def __post_init__(self) -> None:
        self.alphas = np.asarray(self.alphas, dtype=complex)
        self.values = np.asarray(self.values, dtype=complex)
        if self.alphas.shape != self.values.shape:
            raise ValueError("alphas and values must have the same shape")
        at_zero = np.abs(self.alphas) == 0
        if np.any(at_zero) and np.max(np.abs(self.values[at_zero] - 1.0)) > 1e-11:
            raise ValueError("characteristic function must equal 1 at alpha = 0")


def joint_distribution(
    nu: DensityMatrix,
    res: SpectralResolution,
    H: HermitianMatrix,
    t: float,
) -> JointDistribution:
    """Outcome table p(b,a) = tr(e^{-itH} P_a nu P_a e^{itH} P_b).

    Works in the eigenbasis of the measured observable, where the projections
    are coordinate slices; the table costs O(d * sum_a m_a^2) instead of a
    dense superoperator.  Entries are clipped at the roundoff floor and the
    table is renormalized when the total drifts from 1 by less than 1e-8;
    larger drift is a hard error.
    """
    if nu.dim != res.dim or H.dim != res.dim:
        raise ValueError(f"dimension mismatch: state {nu.dim}, resolution {res.dim}, hamiltonian {H.dim}")
    V = res.basis
    u_rot = V.conj().T @ propagator(H, t) @ V
    nu_rot = V.conj().T @ nu.entries @ V
    k = len(res.slices)
    d = res.dim
    # contrib[i, a] = sum_{j,l in cluster a} U_ij nu_jl conj(U_il)
    contrib = np.empty((d, k))
    for a, s in enumerate(res.slices):
        cols = u_rot[:, s]
        block = nu_rot[s, s]
        contrib[:, a] = np.einsum("ij,jl,il->i", cols, block, cols.conj()).real
    starts = [s.start for s in res.slices]
    probs = np.add.reduceat(contrib, starts, axis=0)

    floor = float(probs.min())
    if floor < -1e-12:
        raise NumericalIntegrityError(f"probability {floor:.3e} below the roundoff floor -1e-12")
    np.clip(probs, 0.0, None, out=probs)
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-8:
        raise NumericalIntegrityError(f"probability table sums to {total:.15g}, beyond repair tolerance 1e-8")
    if total != 1.0:
        probs /= total
    return JointDistribution(values=res.values.copy(), probs=probs)


def ep_measure(
    jd: JointDistribution,
    res: SpectralResolution,
    atom_merge_tol: float = ATOM_MERGE_TOL,
) -> AtomicMeasure:
    """Entropy production measure: mass p(b,a) at s = -log lambda_b + log lambda_a."""
    if jd.alphabet_size != len(res.values):
        raise ValueError("joint distribution and resolution do not share an alphabet")
    if np.any(res.values <= 0):
        raise FaithfulnessError("reference state must be faithful to take log eigenvalues")
    logs = np.log(res.values)
    locations = (-logs)[:, None] + logs[None, :]
    q = AtomicMeasure.from_atoms(locations.ravel(), jd.probs.ravel(), merge_tol=atom_merge_tol)
    return q.pruned()


def protocol_measure(
    nu: DensityMatrix,
    omega: DensityMatrix,
    H: HermitianMatrix,
    t: float,
    *,
    cluster_tol: float | None = None,
    atom_merge_tol: float = ATOM_MERGE_TOL,
) -> AtomicMeasure:
    """Convenience: measure Q for state nu, reference omega, in one call."""
    res = spectral_decompose(omega, DEFAULT_CLUSTER_TOL if cluster_tol is None else cluster_tol)
    jd = joint_distribution(nu, res, H, t)
    return ep_measure(jd, res, atom_merge_tol=atom_merge_tol)


def _is_same_state(nu: DensityMatrix, omega: DensityMatrix) -> bool:
    return nu is omega or (nu.dim == omega.dim and np.array_equal(nu.entries, omega.entries))


def char_function_trace(
    nu: DensityMatrix,
    omega: DensityMatrix,
    H: HermitianMatrix,
    t: float,
    alpha: complex,
    *,
    omega_minus_t: DensityMatrix | None = None,
    nu_bar: DensityMatrix | None = None,
) -> complex:
    """Characteristic function via the trace formula tr(w_{-t}^a w^{-a} nubar).

    For nu = omega the algebraically equivalent form tr(w_{-t}^a w^{1-a}) is
    used; it stays numerically benign across the whole strip 0 <= Re a <= 1.
    The two optional keywords let grid evaluations reuse the evolved state and
    the dephased state across alpha values.
    """
    if not omega.faithful:
        raise FaithfulnessError("reference state must be faithful")
    alpha = complex(alpha)
    if omega_minus_t is None:
        omega_minus_t = evolve_state(omega, H, -t)
    left = fractional_power(omega_minus_t, alpha)
    if _is_same_state(nu, omega):
        return complex(np.trace(left @ fractional_power(omega, 1.0 - alpha)))
    if nu_bar is None:
        nu_bar = dephase(nu, spectral_decompose(omega))
    return complex(np.trace(left @ fractional_power(omega, -alpha) @ nu_bar.entries))


def ep_measure_spectral(
    phi: StandardVector,
    omega_minus_t: DensityMatrix,
    omega: DensityMatrix,
    *,
    atom_merge_tol: float = ATOM_MERGE_TOL,
) -> AtomicMeasure:
    """Spectral measure of -log Delta_{omega_{-t}|omega} at the vector phi.

    The relative modular operator acts as X -> omega_{-t} X omega^{-1}, so its
    eigenvectors are |u_b><v_a| over eigenpairs of the two states and the
    measure puts weight |<u_b| phi |v_a>|^2 at -log mu_b + log lambda_a.
    """
    if not omega.faithful:
        raise FaithfulnessError("reference state must be faithful")
    if abs(phi.norm() - 1.0) > 1e-10:
        raise ValueError(f"vector must be unit norm, got {phi.norm():.12g}")
    mu, u_vec = omega_minus_t.eig()
    lam, v_vec = omega.eig()
    if np.any(mu <= 0):
        raise FaithfulnessError("evolved reference state must be faithful")
    amp = u_vec.conj().T @ phi.entries @ v_vec
    locations = (-np.log(mu))[:, None] + np.log(lam)[None, :]
    weights = np.abs(amp) ** 2
    q = AtomicMeasure.from_atoms(locations.ravel(), weights.ravel(), merge_tol=atom_merge_tol)
    return q.pruned()


def ep_measure_spectral_at(
    phi: StandardVector,
    omega: DensityMatrix,
    H: HermitianMatrix,
    t: float,
    *,
    atom_merge_tol: float = ATOM_MERGE_TOL,
) -> AtomicMeasure:
    """Spectral route with the evolved reference computed in place."""
    return ep_measure_spectral(phi, evolve_state(omega, H, -t), omega, atom_merge_tol=atom_merge_tol)


def char_function_cocycle_product(
    nu: DensityMatrix,
    omega: DensityMatrix,
    H: HermitianMatrix,
    t: float,
    alpha: complex,
    *,
    omega_minus_t: DensityMatrix | None = None,
    nu_bar: DensityMatrix | None = None,
) -> complex:
    """Characteristic function as a dephased product of two cocycle values.

    Evaluates nubar(u_{conj(a)/2}^* u_{a/2}) with u the cocycle of the evolved
    reference against the reference; this is the analytic value of the Cesaro
    averaged modular-flow expression and must agree with the trace route for
    purely imaginary alpha.
    """
    alpha = complex(alpha)
    if abs(alpha.real) > 1e-12:
        raise ValueError(f"cocycle-product route needs purely imaginary alpha, got {alpha}")
    if not omega.faithful:
        raise FaithfulnessError("reference state must be faithful")
    if omega_minus_t is None:
        omega_minus_t = evolve_state(omega, H, -t)
    if nu_bar is None:
        nu_bar = dephase(nu, spectral_decompose(omega))

    def cocycle(a: complex) -> np.ndarray:
        return fractional_power(omega_minus_t, a) @ fractional_power(omega, -a)

    u_plus = cocycle(alpha / 2.0)
    u_minus = cocycle(np.conj(alpha) / 2.0)
    return complex(np.trace(nu_bar.entries @ u_minus.conj().T @ u_plus))


def char_function_grid(
    nu: DensityMatrix,
    omega: DensityMatrix,
    H: HermitianMatrix,
    t: float,
    alphas,
    route: str,
    *,
    atom_merge_tol: float = ATOM_MERGE_TOL,
) -> CharFunctionGrid:
    """Evaluate the characteristic function over a grid by the named route.

    Routes: ``direct`` sums e^{-alpha s} over the protocol measure; ``trace``
    and ``cocycle-product`` use their scalar formulas with shared evolved and
    dephased states; ``spectral`` integrates against the spectral measure at
    the vector representative of the dephased state, which reproduces the
    protocol measure for every input state.
    """
    alphas = np.asarray(alphas, dtype=complex).ravel()
    if route == "direct":
        q = protocol_measure(nu, omega, H, t, atom_merge_tol=atom_merge_tol)
        vals = np.array([cf_eval(q, a) for a in alphas])
    elif route == "trace":
        omt = evolve_state(omega, H, -t)
        nub = None if _is_same_state(nu, omega) else dephase(nu, spectral_decompose(omega))
        vals = np.array(
            [char_function_trace(nu, omega, H, t, a, omega_minus_t=omt, nu_bar=nub) for a in alphas]
        )
    elif route == "cocycle-product":
        omt = evolve_state(omega, H, -t)
        nub = dephase(nu, spectral_decompose(omega))
        vals = np.array(
            [
                char_function_cocycle_product(nu, omega, H, t, a, omega_minus_t=omt, nu_bar=nub)
                for a in alphas
            ]
        )
    elif route == "spectral":
        from .modular import vector_representative

        nub = dephase(nu, spectral_decompose(omega))
        q = ep_measure_spectral_at(vector_representative(nub), omega, H, t, atom_merge_tol=atom_merge_tol)
        vals = np.array([cf_eval(q, a) for a in alphas])
    else:
        raise ValueError(f"unknown route {route!r}")
    return CharFunctionGrid(alphas=alphas, values=vals, route=route)
