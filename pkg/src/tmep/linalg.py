"""Dense Hermitian linear algebra with eigenvalue clustering.

Everything downstream (modular maps, measurement statistics, model builders)
reduces to functions of Hermitian matrices evaluated through a single cached
eigendecomposition per matrix.  Matrices are immutable after construction and
Hermiticity is enforced by symmetrization, so repeated products cannot drift
off the Hermitian manifold unnoticed.

Units are natural throughout (hbar = k_B = 1); entries are plain complex
arrays with no unit bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_CLUSTER_TOL",
    "FAITHFULNESS_TOL",
    "FaithfulnessError",
    "HermitianMatrix",
    "DensityMatrix",
    "SpectralResolution",
    "spectral_decompose",
    "matrix_function",
    "fractional_power",
    "matrix_log",
    "psd_sqrt",
    "propagator",
    "complex_propagator",
    "kron",
    "partial_trace",
]

#: Relative tolerance for merging raw eigenvalues into one cluster.  The
#: degenerate eigenspaces of a reference state are exact in theory but only
#: near-degenerate in floating point.
DEFAULT_CLUSTER_TOL = 1e-9

#: Eigenvalues at or below this are treated as zero for the purpose of
#: fractional powers and logarithms.  Below this level a negative power
#: amplifies roundoff past every tolerance used in the checks.
FAITHFULNESS_TOL = 1e-12

_HERMITICITY_TOL = 1e-12
_TRACE_TOL = 1e-12
_EIG_FLOOR = -1e-12


class FaithfulnessError(ValueError):
    """A matrix function needed a strictly positive spectrum and did not get one."""


def _as_square_complex(entries) -> np.ndarray:
    m = np.array(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass
class HermitianMatrix:
    """A complex Hermitian matrix with a write-once eigendecomposition cache.

    Construction symmetrizes the input as (M + M')/2 and freezes the array.
    The eigendecomposition is computed lazily on first use and reused for
    every subsequent matrix function of the same operator.
    """

    entries: np.ndarray
    _eig: tuple | None = field(default=None, repr=False, compare=False)
    _exact_spectrum: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = _as_square_complex(self.entries)
        drift = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if drift > 1e-8 * max(1.0, np.max(np.abs(m))):
            raise ValueError(f"input is not Hermitian up to symmetrization, drift {drift:.3e}")
        m = 0.5 * (m + m.conj().T)
        m.flags.writeable = False
        self.entries = m

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and eigenvectors, cached after the first call."""
        if self._eig is None:
            try:
                w, v = np.linalg.eigh(self.entries)
            except np.linalg.LinAlgError as exc:
                norm = float(np.linalg.norm(self.entries))
                raise RuntimeError(
                    f"eigensolver failed on dim {self.dim} matrix with norm {norm:.3e}: {exc}"
                ) from exc
            w.flags.writeable = False
            v.flags.writeable = False
            self._eig = (w, v)
            self._check_spectrum(w)
        return self._eig

    def _check_spectrum(self, w: np.ndarray) -> None:
        pass

    def seed_eig(self, values, vectors, *, exact: bool = False) -> None:
        """Install an eigendecomposition known in closed form.

        Tensor products and unitary conjugations carry their decompositions
        with them; installing those avoids a solver call and, with ``exact``,
        records that the eigenvalues keep relative accuracy arbitrarily far
        below eps times the norm.  Exactness is what lets deep product Gibbs
        states count as faithful even when their smallest eigenvalue is
        smaller than the absolute resolution of a fresh diagonalization.
        """
        if self._eig is not None:
            raise RuntimeError("eigendecomposition is already fixed for this matrix")
        w = np.asarray(values, dtype=float).copy()
        v = np.asarray(vectors, dtype=complex).copy()
        if w.shape != (self.dim,) or v.shape != (self.dim, self.dim):
            raise ValueError("seeded eigendecomposition shapes do not match the matrix")
        if np.any(np.diff(w) < 0):
            raise ValueError("seeded eigenvalues must be ascending")
        # spot-check the decomposition on a strided set of columns
        cols = np.unique(np.linspace(0, self.dim - 1, min(self.dim, 48)).astype(int))
        resid = float(np.max(np.abs(self.entries @ v[:, cols] - v[:, cols] * w[cols])))
        ortho = float(np.max(np.abs(v[:, cols].conj().T @ v[:, cols] - np.eye(cols.size))))
        scale = max(1.0, float(np.max(np.abs(w))))
        if resid > 1e-8 * scale or ortho > 1e-8:
            raise ValueError(
                f"seeded eigendecomposition rejected: residual {resid:.3e}, orthonormality {ortho:.3e}"
            )
        w.flags.writeable = False
        v.flags.writeable = False
        self._eig = (w, v)
        self._exact_spectrum = bool(exact)
        self._check_spectrum(w)

    @property
    def spectrum_exact(self) -> bool:
        return self._exact_spectrum

    def spectral_norm(self) -> float:
        w, _ = self.eig()
        return float(np.max(np.abs(w))) if w.size else 0.0


@dataclass
class DensityMatrix(HermitianMatrix):
    """A state: Hermitian, unit trace, eigenvalues nonnegative up to roundoff.

    ``faithful`` is True when the smallest eigenvalue clears the
    faithfulness threshold, i.e. the state has full rank for the purposes of
    logarithms and negative powers.
    """

    faithfulness_tol: float = FAITHFULNESS_TOL

    def __post_init__(self) -> None:
        super().__post_init__()
        tr = float(np.trace(self.entries).real)
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"trace must be 1, got {tr:.15g}")
        if tr != 1.0:
            m = self.entries / tr
            m.flags.writeable = False
            self.entries = m

    def _check_spectrum(self, w: np.ndarray) -> None:
        if w.size and w[0] < _EIG_FLOOR:
            raise ValueError(f"state has eigenvalue {w[0]:.3e} below the roundoff floor")

    @property
    def faithful(self) -> bool:
        w, _ = self.eig()
        if self._exact_spectrum:
            return bool(w[0] > 0.0)
        return bool(w[0] > self.faithfulness_tol)

    def min_eigenvalue(self) -> float:
        w, _ = self.eig()
        return float(w[0])


@dataclass
class SpectralResolution:
    """Clustered eigendecomposition of a Hermitian matrix.

    ``basis`` holds orthonormal eigenvectors as columns, grouped so that the
    columns of cluster ``a`` occupy ``slices[a]``.  ``values`` are the cluster
    representatives (means of the merged raw eigenvalues), strictly decreasing
    across the alphabet.  Projections are materialized on demand only; large
    models never need them as dense matrices.
    """

    values: np.ndarray
    basis: np.ndarray
    slices: list[slice]
    raw_values: np.ndarray
    cluster_tol: float

    @property
    def alphabet(self) -> range:
        return range(len(self.values))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def multiplicity(self, a: int) -> int:
        s = self.slices[a]
        return s.stop - s.start

    def projection(self, a: int) -> np.ndarray:
        cols = self.basis[:, self.slices[a]]
        return cols @ cols.conj().T

    @property
    def projections(self) -> list[np.ndarray]:
        return [self.projection(a) for a in self.alphabet]

    def reconstruct(self) -> np.ndarray:
        w = np.empty(self.dim)
        for a, s in enumerate(self.slices):
            w[s.start : s.stop] = self.values[a]
        return (self.basis * w) @ self.basis.conj().T


def spectral_decompose(M: HermitianMatrix, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> SpectralResolution:
    """Cluster the spectrum of ``M`` into its distinct eigenvalues.

    Raw eigenvalues are sorted in decreasing order and adjacent values within
    ``cluster_tol`` of each other are merged into one cluster, the cluster
    value being the mean of its members.  What the tolerance is relative to
    depends on how the spectrum was obtained.  A numerically computed
    spectrum carries absolute accuracy around eps times the largest
    eigenvalue, so gaps are measured against that scale and everything below
    the resulting floor coalesces.  A seeded exact spectrum carries relative
    accuracy per eigenvalue, so gaps are measured against the local
    magnitude; this keeps the log-spectrum faithful deep into the tail of a
    product Gibbs state, where statistics of -log(M) live.
    """
    if cluster_tol < 0:
        raise ValueError("cluster_tol must be nonnegative")
    w, v = M.eig()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    gaps = -np.diff(w)
    if M.spectrum_exact:
        local = np.maximum(np.abs(w[:-1]), np.abs(w[1:]))
        breaks = np.nonzero(gaps > cluster_tol * local)[0] + 1
    else:
        # a zero matrix has scale 0 and collapses to a single cluster
        breaks = np.nonzero(gaps > cluster_tol * scale)[0] + 1
    starts = np.concatenate(([0], breaks))
    stops = np.concatenate((breaks, [w.size]))
    slices = [slice(int(i), int(j)) for i, j in zip(starts, stops)]
    values = np.array([w[s].mean() for s in slices])
    return SpectralResolution(values=values, basis=v, slices=slices, raw_values=w, cluster_tol=cluster_tol)


def matrix_function(
    M: HermitianMatrix,
    f,
    *,
    requires_positive: bool = False,
    zero_tol: float = FAITHFULNESS_TOL,
) -> np.ndarray:
    """Apply a scalar function to the spectrum: f(M) = sum_a f(lambda_a) P_a.

    ``f`` must accept a real numpy array.  With ``requires_positive`` the
    whole spectrum has to clear the faithfulness threshold, otherwise a
    FaithfulnessError names the offending eigenvalue.
    """
    w, v = M.eig()
    effective_tol = 0.0 if M.spectrum_exact else zero_tol
    if requires_positive and (w.size == 0 or w[0] <= effective_tol):
        bad = float(w[0]) if w.size else 0.0
        raise FaithfulnessError(
            f"spectrum contains eigenvalue {bad:.6e} at or below the faithfulness threshold {zero_tol:.1e}"
        )
    fw = np.asarray(f(w))
    return (v * fw) @ v.conj().T


def fractional_power(M: HermitianMatrix, alpha: complex, *, allow_singular: bool = False) -> np.ndarray:
    """Complex power M^alpha through the spectrum, lambda^alpha = exp(alpha log lambda).

    With ``allow_singular`` and Re(alpha) > 0, eigenvalues at or below the
    faithfulness threshold are sent to zero (the continuous extension of
    x^alpha); any other singular case is a hard error.
    """
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(M.dim, dtype=complex)
    w, v = M.eig()
    # a spectrum known in closed form is usable down to any positive value
    floor = 0.0 if M.spectrum_exact else FAITHFULNESS_TOL
    small = w <= floor
    if np.any(small):
        if not (allow_singular and alpha.real > 0):
            raise FaithfulnessError(
                f"cannot raise eigenvalue {float(w[0]):.6e} to power {alpha}; state is not faithful"
            )
        fw = np.zeros(M.dim, dtype=complex)
        pos = ~small
        fw[pos] = np.exp(alpha * np.log(w[pos]))
    else:
        fw = np.exp(alpha * np.log(w))
    return (v * fw) @ v.conj().T


def matrix_log(M: HermitianMatrix) -> np.ndarray:
    return matrix_function(M, np.log, requires_positive=True)


def psd_sqrt(M: HermitianMatrix) -> np.ndarray:
    """Square root of a positive semidefinite matrix; tiny negative eigenvalues clip to 0."""
    return matrix_function(M, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def propagator(H: HermitianMatrix, t: float) -> np.ndarray:
    """Unitary exp(-i t H)."""
    return matrix_function(H, lambda w: np.exp(-1j * t * w))


def complex_propagator(H: HermitianMatrix, z: complex) -> np.ndarray:
    """exp(i z H) for complex time z; used by the KMS check at z = t + i beta."""
    return matrix_function(H, lambda w: np.exp(1j * complex(z) * w))


def kron(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not factors:
        raise ValueError("kron needs at least one factor")
    out = np.asarray(factors[0], dtype=complex)
    for f in factors[1:]:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return out


def partial_trace(M, factor_dims, keep) -> np.ndarray:
    """Trace out all tensor factors except ``keep`` (an index or tuple of indices).

    ``factor_dims`` lists the dimension of each factor in order; their product
    must equal the dimension of ``M``.  Kept factors stay in original order.
    """
    m = np.asarray(M, dtype=complex)
    dims = tuple(int(d) for d in factor_dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ValueError(f"factor dims {dims} do not multiply to matrix dim {m.shape}")
    if isinstance(keep, (int, np.integer)):
        keep = (int(keep),)
    keep = tuple(sorted(set(int(k) for k in keep)))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} factors")
    t = m.reshape(dims + dims)
    nfac = len(dims)
    for ax in sorted((i for i in range(len(dims)) if i not in keep), reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + nfac)
        nfac -= 1
    kept = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(kept, kept)
