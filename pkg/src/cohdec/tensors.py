"""Dense complex tensors: contraction, truncated SVD, entropy of a spectrum.

Conventions used throughout the package:

* A tensor is a ``numpy.ndarray`` of ``complex128`` in C (row-major) order,
  i.e. the last index runs fastest in the flat data layout.
* ``svd_truncate`` splits the legs into a (row, column) bipartition given by
  the number of leading legs, so the caller controls the cut explicitly.
* Truncation policy: ``chi_max`` is mandatory, ``tol`` is a relative cutoff
  on singular values (``s_k / s_0 < tol`` is dropped).  Default ``tol`` is
  ``1e-14``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-14


def contract(a: np.ndarray, b: np.ndarray, pairs) -> np.ndarray:
    """Contract tensors ``a`` and ``b`` over the given index pairs.

    ``pairs`` is a sequence of ``(axis_of_a, axis_of_b)`` tuples.  The result
    carries the unpaired indices of ``a`` (in their original order) followed
    by the unpaired indices of ``b``.

    Raises ``ValueError`` when a paired extent does not match.
    """
    pairs = list(pairs)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise ValueError(
                f"extent mismatch: a axis {i} has {a.shape[i]}, b axis {j} has {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(ax_a, ax_b))


@dataclass
class SVDResult:
    """Truncated SVD ``t ~ u @ diag(s) @ v`` across a fixed leg bipartition.

    ``u`` has shape ``row_dims + (k,)``, ``v`` has shape ``(k,) + col_dims``.
    ``discarded_weight`` is the sum of squared discarded singular values
    divided by the total squared norm (0 for an exact decomposition).
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    discarded_weight: float


def _svd_matrix(m: np.ndarray):
    # gesdd occasionally fails to converge on ill-conditioned complex input;
    # fall back to the slower but more robust gesvd driver.
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(t: np.ndarray, split: int, chi_max: int, tol: float = DEFAULT_TOL) -> SVDResult:
    """SVD of ``t`` with the first ``split`` legs as rows, truncated.

    Keeps at most ``chi_max`` singular values and additionally drops trailing
    values with ``s_k / s_0 < tol``.  At least one value is always kept; a
    zero tensor yields a single zero singular value with zero discarded
    weight.
    """
    if chi_max < 1:
        raise ValueError("chi_max must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    row_dims = t.shape[:split]
    col_dims = t.shape[split:]
    m = t.reshape(int(np.prod(row_dims, dtype=np.int64)), -1)
    u, s, v = _svd_matrix(m)
    total = float(np.sum(s**2))
    if total == 0.0:
        k = 1
        dw = 0.0
    else:
        k = min(chi_max, len(s))
        if tol > 0:
            above = np.count_nonzero(s >= tol * s[0])
            k = min(k, max(1, above))
        dw = float(np.sum(s[k:] ** 2) / total)
    u = u[:, :k].reshape(row_dims + (k,))
    v = v[:k].reshape((k,) + col_dims)
    return SVDResult(u=u, s=s[:k].copy(), v=v, discarded_weight=dw)


def entropy_from_spectrum(s: np.ndarray) -> float:
    """Von Neumann entropy of the normalized squared spectrum.

    ``p_k = s_k^2 / sum_j s_j^2`` and the return value is ``-sum p_k ln p_k``
    with the convention ``0 ln 0 = 0``.  Invariant under rescaling of ``s``.
    """
    s = np.asarray(s, dtype=float)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise ValueError("entropy of an all-zero spectrum is undefined")
    p = s**2 / total
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))
