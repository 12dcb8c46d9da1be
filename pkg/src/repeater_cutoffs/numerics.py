"""Dense linear solves and one-dimensional golden-section maximization."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
import scipy.linalg

__all__ = ["DenseSystem", "SingularMatrixError", "solve_dense", "golden_section_max", "INV_PHI"]

# pivots below this fraction of the largest matrix entry count as zero
PIVOT_TOLERANCE = 1e-14

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class SingularMatrixError(ArithmeticError):
    """Raised when elimination finds no usable pivot."""


@dataclass(frozen=True)
class DenseSystem:
    """Square system ``matrix @ x = rhs``; ``rhs`` may hold several columns."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        b = np.asarray(self.rhs, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"rhs has {b.shape[0]} rows, matrix has {a.shape[0]}")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)


def solve_dense(system: DenseSystem) -> np.ndarray:
    """Solve by LU factorization with partial pivoting (LAPACK ``getrf``/``getrs``).

    Raises
    ------
    SingularMatrixError
        If some pivot is at most ``1e-14`` times the largest entry of the matrix.
    """
    a, b = system.matrix, system.rhs
    if a.shape[0] == 0:
        return b.copy()
    scale = np.max(np.abs(a))
    if scale == 0 or not np.isfinite(scale):
        raise SingularMatrixError("matrix is zero or not finite")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) <= PIVOT_TOLERANCE * scale:
        raise SingularMatrixError(
            f"pivot {np.min(pivots):.3e} below {PIVOT_TOLERANCE:g} relative to {scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-4
) -> Tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]`` to an argument precision of ``tol``.

    The bracket shrinks by the inverse golden ratio per iteration and ``f`` is
    only ever evaluated inside ``[lo, hi]``. The endpoints are evaluated as
    well, so a monotone ``f`` returns the better endpoint.

    Returns
    -------
    (argmax, max)
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo!r}, {hi!r}]")
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    for x in (lo, hi):
        fx = f(x)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f
