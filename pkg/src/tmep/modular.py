"""Finite-dimensional standard representation and modular structure.

A matrix algebra in its standard form: operators double as Hilbert-Schmidt
vectors with inner product tr(X'Y), the algebra acts by left multiplication,
its commutant by right multiplication, the modular conjugation is the adjoint
and the natural cone is the positive semidefinite matrices.  Relative modular
operators and their complex powers are two-sided multiplications; they are
kept as (left, right) factor pairs and never materialized on the doubled
space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    DensityMatrix,
    FaithfulnessError,
    HermitianMatrix,
    SpectralResolution,
    fractional_power,
    matrix_log,
    propagator,
    psd_sqrt,
    spectral_decompose,
)

__all__ = [
    "StandardVector",
    "SandwichMap",
    "sandwich_residual",
    "CocycleCertificate",
    "CesaroResult",
    "vector_representative",
    "relative_modular",
    "connes_cocycle",
    "relative_entropy",
    "dephase",
    "cesaro_average",
    "liouvillean_evolve",
    "evolve_state",
    "modular_conjugation",
    "time_reversal",
]


def modular_conjugation(X: np.ndarray) -> np.ndarray:
    """J: the adjoint, an anti-unitary involution fixing the natural cone."""
    return np.asarray(X).conj().T


def time_reversal(X: np.ndarray) -> np.ndarray:
    """Entrywise conjugation in the distinguished basis."""
    return np.asarray(X).conj()


@dataclass
class StandardVector:
    """A d x d matrix read as a Hilbert-Schmidt vector."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        m.flags.writeable = False
        self.entries = m

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def inner(self, other: "StandardVector") -> complex:
        return complex(np.sum(self.entries.conj() * other.entries))

    def in_natural_cone(self, tol: float = 1e-10) -> bool:
        m = self.entries
        if np.max(np.abs(m - m.conj().T)) > tol:
            return False
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        return bool(w.size == 0 or w[0] > -tol)


@dataclass
class SandwichMap:
    """Two-sided multiplication X -> left X right on Hilbert-Schmidt space."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self) -> None:
        self.left = np.asarray(self.left, dtype=complex)
        self.right = np.asarray(self.right, dtype=complex)
        if self.left.shape != self.right.shape or self.left.ndim != 2:
            raise ValueError("left and right factors must be square matrices of equal size")

    @property
    def dim(self) -> int:
        return self.left.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self.left @ np.asarray(X, dtype=complex) @ self.right

    def apply_vector(self, phi: StandardVector) -> StandardVector:
        return StandardVector(self.apply(phi.entries))

    def compose(self, other: "SandwichMap") -> "SandwichMap":
        """self after other: (A1,B1) o (A2,B2) = (A1 A2, B2 B1)."""
        return SandwichMap(self.left @ other.left, other.right @ self.right)

    @classmethod
    def identity(cls, dim: int) -> "SandwichMap":
        return cls(np.eye(dim, dtype=complex), np.eye(dim, dtype=complex))


def sandwich_residual(m1: SandwichMap, m2: SandwichMap) -> float:
    """Largest Hilbert-Schmidt norm of (m1 - m2) over all matrix units.

    On e_ij the difference is the rank-two matrix
    dA[:,i] B1[j,:] + A2[:,i] dB[j,:] with dA = A1 - A2, dB = B1 - B2; its
    Gram expansion involves only the small difference factors, so near-equal
    maps are compared without the cancellation a direct norm-squared
    expansion of both images would suffer.
    """
    if m1.dim != m2.dim:
        raise ValueError("maps act on different dimensions")
    dA = m1.left - m2.left
    dB = m1.right - m2.right
    a1 = np.sum(np.abs(dA) ** 2, axis=0)
    b1 = np.sum(np.abs(m1.right) ** 2, axis=1)
    a2 = np.sum(np.abs(m2.left) ** 2, axis=0)
    b2 = np.sum(np.abs(dB) ** 2, axis=1)
    p = np.sum(dA.conj() * m2.left, axis=0)
    q = np.sum(m1.right.conj() * dB, axis=1)
    r2 = np.outer(a1, b1) + np.outer(a2, b2) + 2.0 * np.real(np.outer(p, q))
    return float(np.sqrt(max(float(np.max(r2)), 0.0)))


def vector_representative(nu: DensityMatrix) -> StandardVector:
    """The unique natural-cone vector representing nu, here nu^(1/2)."""
    return StandardVector(psd_sqrt(nu))


def relative_modular(nu: DensityMatrix, rho: DensityMatrix, alpha: complex) -> SandwichMap:
    """Power of the relative modular operator of (nu, rho): X -> nu^a X rho^(-a).

    rho must be faithful.  A singular nu is accepted only on powers with
    positive real part, where the continuous extension 0^a = 0 applies.
    """
    alpha = complex(alpha)
    if not rho.faithful:
        raise FaithfulnessError(f"second argument must be faithful, min eigenvalue {rho.min_eigenvalue():.3e}")
    left = fractional_power(nu, alpha, allow_singular=True)
    right = fractional_power(rho, -alpha)
    return SandwichMap(left, right)


@dataclass
class CocycleCertificate:
    """Structural witness that a cocycle lives in the left-acting algebra.

    The composed map Delta_{nu|rho}^{it} Delta_rho^{-it} is probed on matrix
    units: the candidate left factor is fitted from the images of the units
    e_{j1} and the residual is the largest deviation of the map from plain
    left multiplication by that candidate over all d^2 units.
    """

    unitarity_residual: float
    factorization_residual: float
    tol: float = 1e-11

    @property
    def passed(self) -> bool:
        return self.unitarity_residual <= self.tol and self.factorization_residual <= self.tol


def _fit_left_factor(m: SandwichMap) -> np.ndarray:
    d = m.dim
    u = np.empty((d, d), dtype=complex)
    unit = np.zeros((d, d), dtype=complex)
    for j in range(d):
        unit[j, 0] = 1.0
        u[:, j] = m.apply(unit)[:, 0]
        unit[j, 0] = 0.0
    return u


def _left_multiplication_residual(m: SandwichMap, u: np.ndarray) -> float:
    # Largest || m(e_ij) - u e_ij ||_F over matrix units, via the difference
    # form so residuals far below sqrt(eps) stay measurable.
    return sandwich_residual(m, SandwichMap(u, np.eye(m.dim)))


def connes_cocycle(nu: DensityMatrix, rho: DensityMatrix, t: float) -> tuple[np.ndarray, CocycleCertificate]:
    """Cocycle u_t = nu^{it} rho^{-it} with a factorization certificate.

    The certificate checks that Delta_{nu|rho}^{it} Delta_rho^{-it} acts as
    left multiplication by u_t, i.e. its right factor is trivial.
    """
    if not (nu.faithful and rho.faithful):
        raise FaithfulnessError("cocycle requires both states faithful")
    u = fractional_power(nu, 1j * t) @ fractional_power(rho, -1j * t)
    composed = relative_modular(nu, rho, 1j * t).compose(relative_modular(rho, rho, -1j * t))
    fitted = _fit_left_factor(composed)
    unit_res = float(np.max(np.abs(u @ u.conj().T - np.eye(nu.dim))))
    fact_res = max(
        _left_multiplication_residual(composed, fitted),
        float(np.max(np.abs(fitted - u))),
    )
    return u, CocycleCertificate(unitarity_residual=unit_res, factorization_residual=fact_res)


def relative_entropy(nu: DensityMatrix, rho: DensityMatrix) -> float:
    """Araki relative entropy tr(nu (log rho - log nu)), nonpositive, zero iff nu = rho."""
    if not (nu.faithful and rho.faithful):
        raise FaithfulnessError("relative entropy requires faithful states here")
    val = np.trace(nu.entries @ (matrix_log(rho) - matrix_log(nu)))
    return float(val.real)


def dephase(nu: DensityMatrix, res: SpectralResolution) -> DensityMatrix:
    """Pinch nu to the eigenspaces of the resolution: sum_a P_a nu P_a."""
    if nu.dim != res.dim:
        raise ValueError(f"state dim {nu.dim} does not match resolution dim {res.dim}")
    V = res.basis
    rotated = V.conj().T @ nu.entries @ V
    out = np.zeros_like(rotated)
    for s in res.slices:
        out[s, s] = rotated[s, s]
    return DensityMatrix(V @ out @ V.conj().T)


@dataclass
class CesaroResult:
    value: complex
    limit: complex
    bound: float
    gap: float


def cesaro_average(
    nu: DensityMatrix,
    omega: DensityMatrix,
    A: np.ndarray,
    R: float,
    quad_points: int = 64,
) -> CesaroResult:
    """Time average (1/R) int_0^R tr(nu w^{i theta} A w^{-i theta}) d theta.

    Composite midpoint rule with ``quad_points`` nodes per unit theta; the
    integrand is a trigonometric polynomial in theta with frequencies given by
    log-eigenvalue differences of omega, so the midpoint sum reduces to exact
    geometric series per frequency and is evaluated in that closed form.
    Returns the quadrature value, the analytic limit tr(nubar A), the
    gap-based error bound and the minimal modular gap (inf when omega is
    fully degenerate, in which case value = limit = tr(nu A)).
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if not omega.faithful:
        raise FaithfulnessError("reference state must be faithful")
    res = spectral_decompose(omega)
    V = res.basis
    logs = np.log(res.values)
    ell = np.empty(res.dim)
    cluster_id = np.empty(res.dim, dtype=int)
    for a, s in enumerate(res.slices):
        ell[s] = logs[a]
        cluster_id[s] = a
    nu_rot = V.conj().T @ nu.entries @ V
    a_rot = V.conj().T @ np.asarray(A, dtype=complex) @ V
    coeff = nu_rot.T * a_rot
    same = cluster_id[:, None] == cluster_id[None, :]
    limit = complex(np.sum(coeff[same]))
    off = ~same
    if not np.any(off):
        return CesaroResult(value=limit, limit=limit, bound=0.0, gap=np.inf)

    freq = ell[:, None] - ell[None, :]
    d = freq[off]
    c = coeff[off]
    n = max(1, int(np.ceil(R * quad_points)))
    h = R / n
    z = np.exp(1j * h * d)
    zn = np.exp(1j * R * d)
    denom = n * (z - 1.0)
    half = np.exp(0.5j * h * d)
    means = np.where(np.abs(denom) > 1e-12, half * (zn - 1.0) / np.where(denom == 0, 1.0, denom), half)
    value = limit + complex(np.sum(c * means))

    gap = float(np.min(np.abs(logs[:, None] - logs[None, :])[~np.eye(len(logs), dtype=bool)]))
    # Midpoint denominator n|z-1| = R|d| up to the factor sinc(hd/2); fold the
    # worst of it into the constant so the bound stays rigorous until aliasing.
    x = 0.5 * h * np.abs(d)
    sin_x = np.sin(x)
    factor = float(np.max(np.where((x < np.pi) & (sin_x > 0), x / np.where(sin_x <= 0, 1.0, sin_x), np.inf))) if np.any(x > 0) else 1.0
    bound = 2.0 * float(np.sum(np.abs(c))) * factor / (R * gap)
    return CesaroResult(value=value, limit=limit, bound=bound, gap=gap)


def liouvillean_evolve(H: HermitianMatrix, phi: StandardVector, t: float) -> StandardVector:
    """Standard Liouvillean flow: Phi -> e^{-itH} Phi e^{itH}, cone and norm preserving."""
    u = propagator(H, t)
    return StandardVector(u @ phi.entries @ u.conj().T)


def evolve_state(nu: DensityMatrix, H: HermitianMatrix, t: float) -> DensityMatrix:
    """Schroedinger flow of a state, nu_t = e^{-itH} nu e^{itH}.

    When the input already knows its eigendecomposition the output inherits
    it: the spectrum is untouched and the eigenvectors rotate with the
    propagator, so no fresh diagonalization is spent or accuracy lost.
    """
    u = propagator(H, t)
    evolved = DensityMatrix(u @ nu.entries @ u.conj().T)
    if nu._eig is not None:
        w, v = nu.eig()
        evolved.seed_eig(w, u @ v, exact=nu.spectrum_exact)
    return evolved
