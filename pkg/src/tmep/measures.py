"""Finitely supported probability measures on the real line."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ATOM_MERGE_TOL",
    "GHOST_WEIGHT",
    "AbsoluteContinuityError",
    "AtomicMeasure",
    "reflect",
    "rn_derivative",
    "moment",
    "cf_eval",
    "distance_w1",
    "distance_tv",
    "match_atoms",
    "weights_from_cf",
]

#: Absolute tolerance below which two atom locations are considered the same.
ATOM_MERGE_TOL = 1e-8

#: Weights below this are indistinguishable from squared roundoff in the
#: transition amplitudes and are discarded when a measure is assembled.
GHOST_WEIGHT = 1e-20

_MASS_TOL = 1e-11


class AbsoluteContinuityError(ValueError):
    """An atom of the numerator measure has no counterpart in the denominator."""


def _merge_sorted(locations: np.ndarray, weights: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    while locations.size > 1:
        gaps = np.diff(locations)
        if np.all(gaps > tol):
            break
        starts = np.concatenate(([0], np.nonzero(gaps > tol)[0] + 1))
        w = np.add.reduceat(weights, starts)
        # weight-averaged location per merged group
        s = np.add.reduceat(locations * weights, starts) / w
        locations, weights = s, w
    return locations, weights


@dataclass
class AtomicMeasure:
    """Sorted atoms (s_k, w_k) with positive weights summing to one."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.shape != w.shape or s.ndim != 1:
            raise ValueError("locations and weights must be matching 1-d arrays")
        total = float(w.sum())
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"total mass {total:.15g} is not 1 within {_MASS_TOL:g}")
        s.flags.writeable = False
        w.flags.writeable = False
        self.locations = s
        self.weights = w

    @classmethod
    def from_atoms(cls, locations, weights, merge_tol: float = ATOM_MERGE_TOL) -> "AtomicMeasure":
        """Sort, drop nonpositive weights, merge locations closer than merge_tol."""
        s = np.asarray(locations, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        keep = w > 0.0
        s, w = s[keep], w[keep]
        if s.size == 0:
            raise ValueError("measure needs at least one atom of positive weight")
        order = np.argsort(s, kind="stable")
        s, w = _merge_sorted(s[order], w[order], merge_tol)
        total = float(w.sum())
        if abs(total - 1.0) <= _MASS_TOL:
            # the atoms are probabilities by construction; pin the mass exactly
            w = w / total
        return cls(locations=s, weights=w)

    @classmethod
    def point_mass(cls, location: float = 0.0) -> "AtomicMeasure":
        return cls(locations=np.array([float(location)]), weights=np.array([1.0]))

    def __len__(self) -> int:
        return self.locations.size

    def pruned(self, floor: float = GHOST_WEIGHT) -> "AtomicMeasure":
        """Drop atoms whose weight does not exceed the floor."""
        keep = self.weights > floor
        if np.all(keep):
            return self
        return AtomicMeasure(locations=self.locations[keep].copy(), weights=self.weights[keep].copy())

    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.weights.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("s,weight\n")
        for s, w in zip(self.locations, self.weights):
            buf.write(f"{s:.17g},{w:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AtomicMeasure":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0].strip() != "s,weight":
            raise ValueError("expected header 's,weight'")
        rows = [ln.split(",") for ln in lines[1:]]
        s = np.array([float(r[0]) for r in rows])
        w = np.array([float(r[1]) for r in rows])
        return cls(locations=s, weights=w)


def reflect(Q: AtomicMeasure) -> AtomicMeasure:
    """Pushforward under s -> -s."""
    return AtomicMeasure(locations=-Q.locations[::-1].copy(), weights=Q.weights[::-1].copy())


def match_atoms(P: AtomicMeasure, Q: AtomicMeasure, match_tol: float = ATOM_MERGE_TOL):
    """Greedy sorted matching of atoms within match_tol.

    Returns (pairs, unmatched_p, unmatched_q) as index lists.
    """
    pairs: list[tuple[int, int]] = []
    up: list[int] = []
    uq: list[int] = []
    i = j = 0
    while i < len(P) and j < len(Q):
        d = P.locations[i] - Q.locations[j]
        if abs(d) <= match_tol:
            pairs.append((i, j))
            i += 1
            j += 1
        elif d < 0:
            up.append(i)
            i += 1
        else:
            uq.append(j)
            j += 1
    up.extend(range(i, len(P)))
    uq.extend(range(j, len(Q)))
    return pairs, up, uq


def rn_derivative(P: AtomicMeasure, Q: AtomicMeasure, match_tol: float = ATOM_MERGE_TOL) -> list[tuple[float, float]]:
    """Ratios dP/dQ per atom of P; every P atom must sit on a Q atom."""
    pairs, up, _ = match_atoms(P, Q, match_tol)
    if up:
        k = up[0]
        raise AbsoluteContinuityError(
            f"atom at s={P.locations[k]:.12g} (weight {P.weights[k]:.3e}) has no match within {match_tol:g}"
        )
    return [(float(P.locations[i]), float(P.weights[i] / Q.weights[j])) for i, j in pairs]


def moment(Q: AtomicMeasure, k: int) -> float:
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    return float(np.sum(Q.locations**k * Q.weights))


def cf_eval(Q: AtomicMeasure, alpha: complex) -> complex:
    """Characteristic function sum_k e^{-alpha s_k} w_k."""
    return complex(np.sum(np.exp(-complex(alpha) * Q.locations) * Q.weights))


def distance_w1(P: AtomicMeasure, Q: AtomicMeasure) -> float:
    """Wasserstein-1 via the integral of |CDF_P - CDF_Q|."""
    xs = np.sort(np.concatenate([P.locations, Q.locations]))
    dx = np.diff(xs)
    cp = np.concatenate(([0.0], np.cumsum(P.weights)))
    cq = np.concatenate(([0.0], np.cumsum(Q.weights)))
    fp = cp[np.searchsorted(P.locations, xs[:-1], side="right")]
    fq = cq[np.searchsorted(Q.locations, xs[:-1], side="right")]
    return float(np.sum(np.abs(fp - fq) * dx))


def distance_tv(P: AtomicMeasure, Q: AtomicMeasure, match_tol: float = ATOM_MERGE_TOL) -> float:
    """Total variation: half the l1 gap over matched atoms plus unmatched mass."""
    pairs, up, uq = match_atoms(P, Q, match_tol)
    matched = sum(abs(P.weights[i] - Q.weights[j]) for i, j in pairs)
    loose = sum(P.weights[i] for i in up) + sum(Q.weights[j] for j in uq)
    return 0.5 * float(matched + loose)


def weights_from_cf(locations: np.ndarray, alphas: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Least-squares weight recovery from characteristic-function samples.

    Well posed once the support is known; used to cross-check measures against
    independently computed characteristic functions.
    """
    locations = np.asarray(locations, dtype=float)
    alphas = np.asarray(alphas, dtype=complex)
    values = np.asarray(values, dtype=complex)
    design = np.exp(-np.outer(alphas, locations))
    sol, *_ = np.linalg.lstsq(design, values, rcond=None)
    return sol.real
