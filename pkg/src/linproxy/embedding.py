"""Covariance estimation and the vector embedding of random variables.

Random variables Z, X1..Xn are represented as vectors whose pairwise dot
products equal their covariances. Any factorization A^T A = Sigma gives such
vectors as the columns of A.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import lapack

from .errors import ConstantProtectedError, DataError, NotCovarianceError

if TYPE_CHECKING:
    from .dataset import Dataset
    from .metrics import LinearModel

SYMMETRY_RTOL = 1e-12
CLAMP_RTOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric covariance matrix with ordered labels.

    By convention ``labels[0]`` is the protected attribute.
    """

    labels: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        labels = tuple(str(x) for x in self.labels)
        k = len(labels)
        if entries.shape != (k, k):
            raise NotCovarianceError(
                f"expected a {k}x{k} matrix for {k} labels, got shape {entries.shape}"
            )
        if len(set(labels)) != k:
            raise NotCovarianceError("covariance labels must be distinct")
        if not np.all(np.isfinite(entries)):
            raise NotCovarianceError("covariance matrix has non-finite entries")
        scale = max(1.0, float(np.abs(entries).max(initial=0.0)))
        if np.abs(entries - entries.T).max(initial=0.0) > SYMMETRY_RTOL * scale:
            raise NotCovarianceError("covariance matrix is not symmetric")
        if np.any(np.diag(entries) < 0):
            raise NotCovarianceError("covariance matrix has a negative variance")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "entries", _frozen(0.5 * (entries + entries.T)))

    def index(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise DataError(f"unknown column {name!r}") from None

    def select(self, names: Sequence[str]) -> CovarianceMatrix:
        """Sub-matrix over ``names`` in the given order."""
        idx = [self.index(n) for n in names]
        return CovarianceMatrix(tuple(names), self.entries[np.ix_(idx, idx)])

    def variance(self, name: str) -> float:
        i = self.index(name)
        return float(self.entries[i, i])

    def covariance(self, a: str, b: str) -> float:
        return float(self.entries[self.index(a), self.index(b)])

    @classmethod
    def from_csv(cls, path: str | Path) -> CovarianceMatrix:
        """Read a square numeric CSV whose header row holds the labels.

        A leading label column (first column non-numeric, or named like the
        header) is tolerated and ignored.
        """
        frame = pd.read_csv(path)
        if frame.shape[1] == frame.shape[0] + 1:
            frame = frame.iloc[:, 1:]
        try:
            values = frame.to_numpy(dtype=float)
        except ValueError as exc:
            raise DataError(f"covariance file {path} has non-numeric entries") from exc
        return cls(tuple(frame.columns), values)

    def to_csv(self, path: str | Path) -> None:
        pd.DataFrame(self.entries, columns=list(self.labels)).to_csv(path, index=False)


def estimate_covariance(data: Dataset, columns: Sequence[str]) -> CovarianceMatrix:
    """Unbiased sample covariance (divisor m - 1) of the named columns."""
    columns = list(columns)
    if not columns:
        raise DataError("no columns given")
    values = data.matrix(columns)
    m = values.shape[0]
    if m < 2:
        raise DataError(f"need at least 2 rows to estimate covariance, got {m}")
    centered = values - values.mean(axis=0)
    sigma = centered.T @ centered / (m - 1)
    return CovarianceMatrix(tuple(columns), 0.5 * (sigma + sigma.T))


def _eigh_root(entries: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(entries)
    norm = max(abs(w[0]), abs(w[-1]))
    if w[0] < -CLAMP_RTOL * norm:
        raise NotCovarianceError(
            f"not a covariance matrix: eigenvalue {w[0]:.3e} below clamp threshold"
        )
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root) @ v.T


def _pivoted_cholesky(entries: np.ndarray) -> np.ndarray | None:
    """Return U with U^T U = entries, or None if not numerically definite."""
    k = entries.shape[0]
    u, piv, rank, info = lapack.dpstrf(entries, lower=0, tol=-1.0)
    if info != 0 or rank < k:
        return None
    u = np.triu(u)
    perm = np.empty(k, dtype=int)
    perm[piv - 1] = np.arange(k)
    return u[:, perm]


def psd_decompose(sigma: CovarianceMatrix | np.ndarray, method: str = "auto") -> np.ndarray:
    """Square matrix A with A^T A equal to ``sigma``.

    ``method`` is ``"eigh"`` (symmetric square root with eigenvalue clamping),
    ``"cholesky"`` (pivoted Cholesky, definite input only) or ``"auto"``,
    which tries Cholesky and falls back to the square root.
    """
    entries = sigma.entries if isinstance(sigma, CovarianceMatrix) else np.asarray(sigma, float)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise NotCovarianceError("covariance matrix must be square")
    scale = max(1.0, float(np.abs(entries).max(initial=0.0)))
    if np.abs(entries - entries.T).max(initial=0.0) > SYMMETRY_RTOL * scale:
        raise NotCovarianceError("covariance matrix is not symmetric")
    entries = 0.5 * (entries + entries.T)
    if method == "eigh":
        return _eigh_root(entries)
    if method not in ("auto", "cholesky"):
        raise ValueError(f"unknown decomposition method {method!r}")
    root = _pivoted_cholesky(entries)
    if root is not None:
        return root
    if method == "cholesky":
        raise NotCovarianceError("matrix is not numerically positive definite")
    return _eigh_root(entries)


@dataclass(frozen=True, eq=False)
class EmbeddedProblem:
    """Vectors for Z and the scaled model inputs.

    ``vectors`` holds the unscaled input embeddings x_i as columns and
    ``matrix`` the scaled columns beta_i x_i. ``c`` are the column norms of
    ``matrix``.
    """

    inputs: tuple[str, ...]
    protected: str
    coefficients: np.ndarray
    z: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        for name in ("coefficients", "z", "vectors"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.vectors.shape != (self.z.size, len(self.inputs)):
            raise ValueError("vector shapes do not match the number of inputs")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @cached_property
    def matrix(self) -> np.ndarray:
        return _frozen(self.vectors * self.coefficients)

    @cached_property
    def c(self) -> np.ndarray:
        return _frozen(np.linalg.norm(self.matrix, axis=0))

    @cached_property
    def model_variance(self) -> float:
        total = self.matrix.sum(axis=1)
        return float(total @ total)

    @cached_property
    def z_norm(self) -> float:
        return float(np.linalg.norm(self.z))

    @cached_property
    def spectral_norm(self) -> float:
        """Largest singular value of ``matrix``."""
        return float(np.linalg.norm(self.matrix, 2)) if self.matrix.size else 0.0

    def column(self, name: str) -> int:
        try:
            return self.inputs.index(name)
        except ValueError:
            raise DataError(f"{name!r} is not a model input") from None

    def component(self, alphas) -> np.ndarray:
        """Embedded vector of the component with coefficients ``alphas``."""
        return self.matrix @ np.asarray(alphas, dtype=float)


def embed(model: LinearModel, sigma: CovarianceMatrix, method: str = "auto") -> EmbeddedProblem:
    """Embed ``model`` using covariances from ``sigma`` (label 0 is Z)."""
    protected = sigma.labels[0]
    unknown = [x for x in model.inputs if x not in sigma.labels]
    if unknown:
        raise DataError(f"model references unknown column(s): {', '.join(unknown)}")
    if protected in model.inputs:
        raise DataError(f"protected attribute {protected!r} cannot be a model input")
    sub = sigma.select((protected,) + tuple(model.inputs))
    if sub.entries[0, 0] <= 0:
        raise ConstantProtectedError(f"protected attribute {protected!r} is constant")
    a = psd_decompose(sub, method)
    return EmbeddedProblem(
        inputs=tuple(model.inputs),
        protected=protected,
        coefficients=model.coefficients,
        z=a[:, 0],
        vectors=a[:, 1:],
    )
