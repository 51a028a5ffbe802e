"""Minimal-norm projection of coefficient vectors onto the endpoint system."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .assembly import LAPACK_LOCK, EqualitySystem
from .basis import coeffs_to_axis_major


def project_to_boundary(coeffs, equality: EqualitySystem) -> np.ndarray:
    """Closest coefficient vector (Euclidean) satisfying A xi = b.

    Computes xi - A^T (A A^T)^{-1} (A xi - b).  A A^T is block diagonal with
    the same 6 x 6 endpoint Gram block for every robot and axis, so the
    cached Cholesky factor from the equality system does all the work.
    Idempotent: projecting twice changes nothing beyond round-off.
    """
    C = coeffs_to_axis_major(coeffs, equality.n, equality.degree)
    residual = np.einsum("ank,ck->anc", C, equality.block) - equality.rhs_axes
    # shape (3, n, 6) -> one 6 x 6 solve with 3n right-hand sides
    with LAPACK_LOCK:
        y = scipy.linalg.cho_solve(equality.gram_chol, residual.reshape(-1, 6).T)
    corrected = C - (y.T @ equality.block).reshape(C.shape)
    return corrected.ravel()
