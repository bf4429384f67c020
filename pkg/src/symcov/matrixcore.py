"""Dense symmetric-matrix algebra: sample covariance, spectral decomposition,
Gaussian negative log-likelihood, Frobenius norms, and the CSV carriers.

Everything here is immutable after construction and every operation is pure,
so concurrent callers need no locking.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Relative pivot below which a Cholesky factor is treated as rank deficient.
PIVOT_RTOL = 1e-12


class CenteringError(ValueError):
    """Operation requires mean-centered data."""


class DimensionMismatchError(ValueError):
    """Incompatible matrix or dataset dimensions."""


class NumericalError(RuntimeError):
    """A dense linear-algebra kernel failed to converge."""


def _matrix_digest(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class SymmetricMatrix:
    """Dense M x M real symmetric matrix.

    Symmetry is enforced at construction by replacing the input with
    (A + A.T)/2, which removes a class of accumulation-drift bugs in long
    projection/blend chains. The backing array is read-only.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.values, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise DimensionMismatchError("matrix dimension must be >= 1")
        a = (a + a.T) / 2.0
        a.flags.writeable = False
        object.__setattr__(self, "values", a)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.values))

    @classmethod
    def identity(cls, m: int) -> "SymmetricMatrix":
        return cls(np.eye(m))


@dataclass(frozen=True)
class Dataset:
    """N x M observation matrix with a mean-centering flag.

    When ``centered`` is set, every column mean must vanish to within
    1e-10 times the column standard deviation; the constructor checks this.
    """

    rows: np.ndarray
    centered: bool = False

    def __post_init__(self) -> None:
        r = np.asarray(self.rows, dtype=float)
        if r.ndim != 2:
            raise DimensionMismatchError(f"dataset rows must be 2-D, got shape {r.shape}")
        if r.shape[0] < 1 or r.shape[1] < 1:
            raise DimensionMismatchError("dataset needs at least one row and one column")
        if self.centered and r.shape[0] >= 2:
            # A single row carries no empirical centering evidence, and a
            # zero-spread column has no scale to compare against; in both
            # cases the flag records the caller's mean-zero modelling
            # assumption rather than an empirically checkable fact.
            mean = r.mean(axis=0)
            std = r.std(axis=0)
            bad = (std > 0) & (np.abs(mean) > 1e-10 * std)
            if np.any(bad):
                raise CenteringError("centered flag set but column means are not zero")
        r = r.copy()
        r.flags.writeable = False
        object.__setattr__(self, "rows", r)

    @property
    def n_obs(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def center(self) -> "Dataset":
        """Return a column-mean-centered copy with the centered flag set."""
        return Dataset(self.rows - self.rows.mean(axis=0), centered=True)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending with the matching orthonormal column basis."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.eigenvalues, dtype=float)
        u = np.asarray(self.eigenvectors, dtype=float)
        w.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", u)

    def reconstruct(self) -> SymmetricMatrix:
        return SymmetricMatrix(
            (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T
        )


def second_moment(rows: np.ndarray) -> SymmetricMatrix:
    """(1/N) X^T X of raw rows, with no centering contract attached.

    Internal building block for per-fold covariances, where the rows are a
    slice of an already-centered dataset and do not themselves satisfy the
    Dataset centering invariant.
    """
    rows = np.asarray(rows, dtype=float)
    return SymmetricMatrix(rows.T @ rows / rows.shape[0])


def sample_covariance(data: Dataset) -> SymmetricMatrix:
    """Sample covariance (1/N) sum_n x_n x_n^T of a centered dataset."""
    if not data.centered:
        raise CenteringError("sample_covariance requires centered data; call Dataset.center()")
    return second_moment(data.rows)


def spectral(a: SymmetricMatrix) -> SpectralDecomposition:
    """Full symmetric eigendecomposition, eigenvalues descending."""
    try:
        w, u = np.linalg.eigh(a.values)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigendecomposition failed to converge (matrix sha256:{_matrix_digest(a.values)})"
        ) from exc
    return SpectralDecomposition(w[::-1].copy(), u[:, ::-1].copy())


def cholesky_pivots(a: SymmetricMatrix) -> np.ndarray | None:
    """Diagonal of the Cholesky factor, or None when the matrix is not SPD."""
    try:
        ell = np.linalg.cholesky(a.values)
    except np.linalg.LinAlgError:
        return None
    return np.diag(ell)


def gaussian_nll_per_sample(sigma: SymmetricMatrix, r_test: SymmetricMatrix) -> float:
    """Per-sample Gaussian NLL: (1/2) logdet(sigma) + (1/2) tr(sigma^-1 r_test).

    Computed through a Cholesky factorization. A singular or non-positive-
    definite model (smallest pivot <= PIVOT_RTOL times the largest) returns
    +inf rather than raising: downstream sweeps tabulate non-finite scores as
    legal losing entries, so the sentinel must propagate through comparisons.
    """
    if sigma.dim != r_test.dim:
        raise DimensionMismatchError(f"model dim {sigma.dim} != test dim {r_test.dim}")
    try:
        ell = np.linalg.cholesky(sigma.values)
    except np.linalg.LinAlgError:
        return float("inf")
    piv = np.diag(ell)
    if piv.min() <= PIVOT_RTOL * piv.max():
        return float("inf")
    logdet = 2.0 * float(np.sum(np.log(piv)))
    solved = scipy.linalg.cho_solve((ell, True), r_test.values, check_finite=False)
    return 0.5 * logdet + 0.5 * float(np.trace(solved))


def frobenius_norm(a: SymmetricMatrix) -> float:
    return float(np.linalg.norm(a.values, "fro"))


def frobenius_inner(a: SymmetricMatrix, b: SymmetricMatrix) -> float:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"inner product dims {a.dim} != {b.dim}")
    return float(np.sum(a.values * b.values))


# ---------------------------------------------------------------------------
# CSV carriers.
#
# Matrix CSV: first line M, then M lines of M comma-separated decimals.
# Dataset CSV: first line N,M then N rows.
# ---------------------------------------------------------------------------

def _format_row(row: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in row)


def write_matrix_csv(path, a: SymmetricMatrix) -> None:
    with open(path, "w") as fh:
        fh.write(f"{a.dim}\n")
        for row in a.values:
            fh.write(_format_row(row) + "\n")


def read_matrix_csv(path) -> SymmetricMatrix:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    m = int(lines[0])
    if len(lines) != m + 1:
        raise ValueError(f"{path}: expected {m} rows, found {len(lines) - 1}")
    rows = [np.fromstring(ln, sep=",") for ln in lines[1:]]
    a = np.vstack(rows)
    if a.shape != (m, m):
        raise ValueError(f"{path}: malformed matrix body {a.shape}")
    return SymmetricMatrix(a)


def write_dataset_csv(path, data: Dataset) -> None:
    with open(path, "w") as fh:
        fh.write(f"{data.n_obs},{data.dim}\n")
        for row in data.rows:
            fh.write(_format_row(row) + "\n")


def read_dataset_csv(path, centered: bool = True) -> Dataset:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    n, m = (int(tok) for tok in lines[0].split(","))
    if len(lines) != n + 1:
        raise ValueError(f"{path}: expected {n} rows, found {len(lines) - 1}")
    rows = np.vstack([np.fromstring(ln, sep=",") for ln in lines[1:]])
    if rows.shape != (n, m):
        raise ValueError(f"{path}: malformed dataset body {rows.shape}")
    return Dataset(rows, centered=centered)
