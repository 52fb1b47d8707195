"""Symmetric eigendecomposition via classical Jacobi rotations.

Each step zeroes the off-diagonal element of largest absolute value with
a plane rotation, accumulating the rotations into the eigenvector matrix.
Iteration stops once the largest off-diagonal modulus falls below epsilon
(absolute by default, optionally relative to the input Frobenius norm).
Eigenvalues are returned sorted by absolute value, largest first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DidNotConvergeError

QUARTER_PI = math.pi / 4.0


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Square real matrix, symmetric within 1e-12 relative tolerance."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("entries must be a square matrix of order >= 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("entries must be finite")
        scale = max(1.0, float(np.max(np.abs(a))))
        if float(np.max(np.abs(a - a.T))) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric within tolerance")
        object.__setattr__(self, "entries", (a + a.T) / 2.0)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_array(cls, a) -> "SymmetricMatrix":
        return cls(entries=np.asarray(a, dtype=np.float64))


@dataclass(frozen=True)
class JacobiConfig:
    """epsilon: stopping threshold (absolute unless relative=True)."""

    epsilon: float = 1e-3
    max_sweeps: int = 100
    relative: bool = False

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """values sorted by |value| descending; vectors[:, q] belongs to values[q]."""

    values: np.ndarray
    vectors: np.ndarray
    sweeps_used: int
    final_offdiag: float
    offdiag_trace: tuple[float, ...] = ()

    @property
    def order(self) -> int:
        return len(self.values)


def rotation_angle(a_mm: float, a_nn: float, a_mn: float) -> float:
    """Plane-rotation angle that zeroes the (m, n) entry.

    0.5 * atan2(2*a_mn, a_mm - a_nn), folded into [-pi/4, pi/4]; the
    atan2 form keeps the equal-diagonal case at pi/4 * sign(a_mn).
    """
    if a_mn == 0.0:
        return 0.0
    theta = 0.5 * math.atan2(2.0 * a_mn, a_mm - a_nn)
    if theta > QUARTER_PI:
        theta -= 2.0 * QUARTER_PI
    elif theta < -QUARTER_PI:
        theta += 2.0 * QUARTER_PI
    return theta


def _apply_rotation(a: np.ndarray, v: np.ndarray, m: int, n: int, theta: float) -> None:
    c = math.cos(theta)
    s = math.sin(theta)
    row_m = a[m, :].copy()
    row_n = a[n, :].copy()
    a[m, :] = c * row_m + s * row_n
    a[n, :] = c * row_n - s * row_m
    col_m = a[:, m].copy()
    col_n = a[:, n].copy()
    a[:, m] = c * col_m + s * col_n
    a[:, n] = c * col_n - s * col_m
    a[m, n] = 0.0
    a[n, m] = 0.0
    vec_m = v[:, m].copy()
    vec_n = v[:, n].copy()
    v[:, m] = c * vec_m + s * vec_n
    v[:, n] = c * vec_n - s * vec_m


def _sorted_decomposition(diag, vectors, sweeps, final_off, trace):
    d = len(diag)
    order = sorted(range(d), key=lambda q: (-abs(diag[q]), -diag[q], q))
    return EigenDecomposition(
        values=np.array([diag[q] for q in order]),
        vectors=vectors[:, order].copy(),
        sweeps_used=sweeps,
        final_offdiag=final_off,
        offdiag_trace=tuple(trace),
    )


def jacobi_eigen(
    matrix: SymmetricMatrix,
    cfg: JacobiConfig | None = None,
    record_offdiag: bool = False,
) -> EigenDecomposition:
    """Diagonalize by repeated largest-pivot Jacobi rotations.

    One sweep is d*(d-1)/2 rotations. Raises DidNotConvergeError when
    max_sweeps full sweeps leave the largest off-diagonal modulus at or
    above the threshold.
    """
    cfg = cfg or JacobiConfig()
    a = matrix.entries.copy()
    d = matrix.order
    v = np.eye(d)
    trace: list[float] = []

    if d == 1:
        return _sorted_decomposition(a.diagonal(), v, 0, 0.0, trace)

    thresh = cfg.epsilon
    if cfg.relative:
        thresh *= float(np.linalg.norm(a))
    iu = np.triu_indices(d, 1)
    pairs_per_sweep = d * (d - 1) // 2
    sweeps = 0
    rotations_in_sweep = 0

    while True:
        absoff = np.abs(a[iu])
        k = int(np.argmax(absoff))
        off = float(absoff[k])
        # off == 0 ends the loop even when a zero-norm input makes the
        # relative threshold itself zero
        if off < thresh or off == 0.0:
            break
        if rotations_in_sweep == 0:
            if sweeps == cfg.max_sweeps:
                raise DidNotConvergeError(sweeps, off)
            sweeps += 1
        m = int(iu[0][k])
        n = int(iu[1][k])
        theta = rotation_angle(a[m, m], a[n, n], a[m, n])
        _apply_rotation(a, v, m, n, theta)
        rotations_in_sweep = (rotations_in_sweep + 1) % pairs_per_sweep
        if record_offdiag:
            trace.append(float(np.linalg.norm(a[iu])))

    return _sorted_decomposition(a.diagonal().copy(), v, sweeps, off, trace)


def reconstruct(decomp: EigenDecomposition) -> SymmetricMatrix:
    """Rebuild V * diag(values) * V^T; round-trip check for the solver."""
    b = (decomp.vectors * decomp.values) @ decomp.vectors.T
    return SymmetricMatrix(entries=(b + b.T) / 2.0)
