"""Condition-checked dense linear solves.

Every matrix inversion in the package goes through a LU factorization with a
1-norm reciprocal-condition estimate; explicit inverses are never formed for
solves.  A factorization whose estimate falls below ``rcond_floor`` raises
:class:`~bdris.errors.SingularMatrixError` instead of returning garbage.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
from scipy.linalg import get_lapack_funcs

from .errors import SingularMatrixError

DEFAULT_RCOND_FLOOR = 1e-14


class CheckedFactor:
    """LU factorization of a square complex matrix with a validated condition number.

    Reusable for repeated solves against the same matrix (``trans=1`` solves
    with the transposed matrix, which is free given the factorization).
    """

    def __init__(self, a: np.ndarray, *, rcond_floor: float = DEFAULT_RCOND_FLOOR,
                 what: str = "matrix"):
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"{what} must be square, got shape {a.shape}")
        anorm = np.linalg.norm(a, 1)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
        except (ValueError, scipy.linalg.LinAlgError) as exc:
            raise SingularMatrixError(f"{what}: factorization failed: {exc}") from exc
        gecon = get_lapack_funcs("gecon", (lu,))
        rcond, _ = gecon(lu, anorm, norm="1")
        rcond = float(np.real(rcond))
        if not np.isfinite(rcond) or rcond < rcond_floor:
            raise SingularMatrixError(
                f"{what} is numerically singular (rcond {rcond:.3e} < {rcond_floor:.3e})")
        self._lu = (lu, piv)
        self.rcond = rcond

    def solve(self, b: np.ndarray, trans: int = 0) -> np.ndarray:
        return scipy.linalg.lu_solve(self._lu, np.asarray(b, dtype=complex), trans=trans)


def solve_checked(a: np.ndarray, b: np.ndarray, *,
                  rcond_floor: float = DEFAULT_RCOND_FLOOR,
                  what: str = "matrix") -> np.ndarray:
    """Solve ``a @ x = b`` with a singularity check; returns ``x``."""
    return CheckedFactor(a, rcond_floor=rcond_floor, what=what).solve(b)


def solve_right_checked(b: np.ndarray, a: np.ndarray, *,
                        rcond_floor: float = DEFAULT_RCOND_FLOOR,
                        what: str = "matrix") -> np.ndarray:
    """Solve ``x @ a = b`` (i.e. ``b @ a^-1``) with a singularity check."""
    fact = CheckedFactor(a, rcond_floor=rcond_floor, what=what)
    b = np.asarray(b, dtype=complex)
    # x a = b  <=>  a^T x^T = b^T
    return fact.solve(b.T, trans=1).T


def as_complex_matrix(x, name: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Coerce to a complex ndarray, rejecting NaN/Inf entries and wrong shapes."""
    arr = np.asarray(x, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    return arr
