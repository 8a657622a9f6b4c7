"""Dense complex linear algebra for small matrices.

Numerical rank, generalized eigenvalues of (possibly singular) pencils,
and Vandermonde least-squares solves.  Everything here is sized for the
pencils the search driver builds (dimension <= 64), so plain dense
LAPACK-backed routines are used throughout: SVD for rank, the QZ
factorization (via ``scipy.linalg.eig`` with homogeneous eigenvalues, which
never inverts the right-hand matrix) for pencils, and an orthogonal
least-squares solve for Vandermonde systems.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DegenerateSystemError, InvalidInputError

#: Unit roundoff of IEEE double precision.
UNIT_ROUNDOFF = float(np.finfo(float).eps) / 2.0

#: Singular values below sigma_max times this floor count as zero even when
#: the caller's absolute tolerance is smaller (50x unit roundoff).
RELATIVE_RANK_FLOOR = 50.0 * UNIT_ROUNDOFF

#: Largest pencil dimension the generalized eigensolver accepts.
MAX_PENCIL_DIM = 64

FINITE = "finite"
INFINITE = "infinite"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ComplexMatrix:
    """Dense complex matrix stored row-major as a flat tuple of entries."""

    rows: int
    cols: int
    entries: tuple

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise InvalidInputError("matrix dimensions must be nonnegative")
        if self.rows * self.cols != len(self.entries):
            raise InvalidInputError(
                f"{self.rows}x{self.cols} matrix needs {self.rows * self.cols} "
                f"entries, got {len(self.entries)}"
            )
        arr = np.asarray(self.entries, dtype=complex)
        if arr.size and not np.all(np.isfinite(arr)):
            raise InvalidInputError("matrix entries must be finite")

    @classmethod
    def from_array(cls, array):
        arr = np.asarray(array, dtype=complex)
        if arr.ndim != 2:
            raise InvalidInputError("expected a 2-d array")
        return cls(arr.shape[0], arr.shape[1], tuple(complex(v) for v in arr.ravel()))

    def to_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=complex).reshape(self.rows, self.cols)


def _as_array(matrix) -> np.ndarray:
    """Coerce a ComplexMatrix or array-like to a validated complex ndarray."""
    if isinstance(matrix, ComplexMatrix):
        return matrix.to_array()
    arr = np.asarray(matrix, dtype=complex)
    if arr.ndim != 2:
        raise InvalidInputError("expected a 2-d matrix")
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix entries must be finite")
    return arr


@dataclass(frozen=True)
class GeneralizedEigenvalue:
    """One homogeneous eigenvalue (alpha, beta) of a matrix pencil.

    The eigenvalue proper is alpha/beta.  ``classification`` is one of
    "finite", "infinite" (beta negligibly small against alpha) or
    "indeterminate" (both components negligible, as happens for the
    deliberately singular pencils of the error estimator).  ``vector`` holds
    the right eigenvector for finite entries, None otherwise.
    """

    alpha: complex
    beta: complex
    classification: str
    vector: tuple = None

    @property
    def value(self) -> complex:
        if self.classification != FINITE:
            raise InvalidInputError(
                f"eigenvalue is {self.classification}, not finite"
            )
        return self.alpha / self.beta


def classification_tolerance(a, b) -> float:
    """tol_beta used to split finite/infinite/indeterminate eigenvalues.

    Scales with the pencil data: 1e3 * unit roundoff * max(inf-norms).
    """
    arr_a, arr_b = _as_array(a), _as_array(b)
    scale = max(
        float(np.max(np.sum(np.abs(arr_a), axis=1), initial=0.0)),
        float(np.max(np.sum(np.abs(arr_b), axis=1), initial=0.0)),
        1.0,
    )
    return 1e3 * UNIT_ROUNDOFF * scale


def numerical_rank(matrix, abs_tol: float) -> int:
    """Number of singular values above max(abs_tol, sigma_max * 50u)."""
    if abs_tol < 0:
        raise InvalidInputError("abs_tol must be nonnegative")
    arr = _as_array(matrix)
    if arr.size == 0:
        return 0
    sigma = np.linalg.svd(arr, compute_uv=False)
    threshold = max(abs_tol, float(sigma[0]) * RELATIVE_RANK_FLOOR)
    return int(np.count_nonzero(sigma > threshold))


def generalized_eig(a, b, tol_beta: float = None):
    """All homogeneous eigenvalues of the pencil (A, B) with eigenvectors.

    Uses the QZ factorization, so B may be exactly singular; infinite and
    indeterminate eigenvalues are classified rather than inverted away.
    Returns a list of ``GeneralizedEigenvalue`` of length N, sorted by
    (classification, real, imag) with finite entries first.
    """
    arr_a, arr_b = _as_array(a), _as_array(b)
    if arr_a.shape != arr_b.shape or arr_a.shape[0] != arr_a.shape[1]:
        raise InvalidInputError("pencil matrices must be square and same shape")
    n = arr_a.shape[0]
    if n > MAX_PENCIL_DIM:
        raise InvalidInputError(f"pencil dimension {n} exceeds {MAX_PENCIL_DIM}")
    if n == 0:
        return []
    if tol_beta is None:
        tol_beta = classification_tolerance(arr_a, arr_b)
    try:
        w, vr = scipy.linalg.eig(arr_a, arr_b, right=True, homogeneous_eigvals=True)
    except np.linalg.LinAlgError as exc:  # QZ iteration failure
        raise ConvergenceError(f"QZ iteration did not converge: {exc}") from exc
    alphas, betas = np.asarray(w[0]), np.asarray(w[1])
    out = []
    for i in range(n):
        alpha, beta = complex(alphas[i]), complex(betas[i])
        if abs(alpha) <= tol_beta and abs(beta) <= tol_beta:
            cls_ = INDETERMINATE
        elif abs(beta) <= tol_beta * max(abs(alpha), 1.0):
            cls_ = INFINITE
        else:
            cls_ = FINITE
        vector = tuple(complex(v) for v in vr[:, i]) if cls_ == FINITE else None
        out.append(GeneralizedEigenvalue(alpha, beta, cls_, vector))

    def _key(ev):
        order = {FINITE: 0, INFINITE: 1, INDETERMINATE: 2}[ev.classification]
        if ev.classification == FINITE:
            lam = ev.value
            return (order, lam.real, lam.imag)
        return (order, 0.0, 0.0)

    return sorted(out, key=_key)


def vandermonde_solve(nodes, rhs):
    """Least-squares weights w with  sum_j nodes_j**k * w_j ~= rhs_k.

    The system matrix has rows k = 0..K-1 (K = len(rhs)) and one column per
    node; it is solved by an orthogonal factorization.  Returns
    (weights, residual_norm).
    """
    node_arr = np.asarray(nodes, dtype=complex)
    rhs_arr = np.asarray(rhs, dtype=complex)
    if node_arr.ndim != 1 or rhs_arr.ndim != 1:
        raise InvalidInputError("nodes and rhs must be 1-d sequences")
    n = node_arr.size
    k = rhs_arr.size
    if n == 0:
        raise InvalidInputError("need at least one node")
    if k < n:
        raise InvalidInputError(f"need len(rhs) >= len(nodes), got {k} < {n}")
    scale = np.maximum(np.abs(node_arr)[:, None], np.abs(node_arr)[None, :])
    np.fill_diagonal(scale, 1.0)
    dist = np.abs(node_arr[:, None] - node_arr[None, :])
    np.fill_diagonal(dist, np.inf)
    if np.any(dist <= 1e-14 * np.maximum(scale, 1.0)):
        raise DegenerateSystemError("duplicate nodes in Vandermonde system")
    vmat = np.empty((k, n), dtype=complex)
    vmat[0] = 1.0
    for row in range(1, k):
        vmat[row] = vmat[row - 1] * node_arr
    weights, *_ = np.linalg.lstsq(vmat, rhs_arr, rcond=None)
    residual = float(np.linalg.norm(vmat @ weights - rhs_arr))
    return weights, residual
