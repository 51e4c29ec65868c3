"""Linear models, components, and the association/influence measures."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .embedding import EmbeddedProblem
from .errors import ConstantProtectedError, DataError, DegenerateModelError

INTERCEPT_KEY = "__intercept__"


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Y_hat = intercept + sum_i coefficients[i] * inputs[i]."""

    inputs: tuple[str, ...]
    coefficients: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        inputs = tuple(str(x) for x in self.inputs)
        beta = np.array(self.coefficients, dtype=float).reshape(-1)
        if not inputs:
            raise ValueError("a linear model needs at least one input")
        if len(inputs) != beta.size:
            raise ValueError(f"{len(inputs)} inputs but {beta.size} coefficients")
        if len(set(inputs)) != len(inputs):
            raise ValueError("model input names must be distinct")
        if not np.all(np.isfinite(beta)) or not np.isfinite(self.intercept):
            raise ValueError("model coefficients must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "coefficients", beta)
        object.__setattr__(self, "intercept", float(self.intercept))

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return (
            self.inputs == other.inputs
            and np.array_equal(self.coefficients, other.coefficients)
            and self.intercept == other.intercept
        )

    def predict(self, data) -> np.ndarray:
        return data.matrix(self.inputs) @ self.coefficients + self.intercept

    @classmethod
    def from_csv(cls, path: str | Path) -> LinearModel:
        """Read ``feature,coefficient`` rows; ``__intercept__`` sets the intercept."""
        try:
            frame = pd.read_csv(path, dtype={"feature": str})
        except FileNotFoundError:
            raise DataError(f"model file not found: {path}") from None
        if list(frame.columns[:2]) != ["feature", "coefficient"]:
            raise DataError("model file must have header 'feature,coefficient'")
        coef = pd.to_numeric(frame["coefficient"], errors="coerce")
        if coef.isna().any():
            row = int(np.flatnonzero(coef.isna().to_numpy())[0])
            raise DataError(f"model file has a non-numeric coefficient at row {row + 1}")
        names = frame["feature"].str.strip().tolist()
        intercept = 0.0
        if INTERCEPT_KEY in names:
            i = names.index(INTERCEPT_KEY)
            intercept = float(coef.iloc[i])
            del names[i]
            coef = coef.drop(coef.index[i])
        return cls(tuple(names), coef.to_numpy(dtype=float), intercept)

    def to_csv(self, path: str | Path) -> None:
        rows = list(zip(self.inputs, self.coefficients.tolist()))
        rows.append((INTERCEPT_KEY, self.intercept))
        pd.DataFrame(rows, columns=["feature", "coefficient"]).to_csv(path, index=False)


@dataclass(frozen=True)
class Thresholds:
    """Proxy thresholds.

    ``epsilon`` bounds association, ``delta`` influence, ``epsilon_prime`` is
    the association slack allowed over the exempt variable, and ``tolerance``
    widens every threshold comparison so boundary ties are deterministic.
    """

    epsilon: float
    delta: float
    epsilon_prime: float = 0.05
    tolerance: float = 1e-9

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.epsilon_prime < 0:
            raise ValueError("epsilon_prime must be nonnegative")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")


@dataclass(frozen=True, eq=False)
class Component:
    """Sub-model sum_i alphas[i] * beta_i * X_i with its evaluated metrics.

    ``association`` is None when the component has zero variance.
    """

    alphas: np.ndarray
    association: float | None
    influence: float

    def __post_init__(self):
        a = np.array(self.alphas, dtype=float)
        if np.any(a < 0) or np.any(a > 1):
            raise ValueError("component coefficients must lie in [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)


class ExemptionStatus(str, enum.Enum):
    EXEMPT = "exempt"
    NONEXEMPT = "nonexempt"
    NOT_A_PROXY = "not-a-proxy"


def association(p, z) -> float | None:
    """Squared correlation of embedded vectors ``p`` and ``z``.

    Returns None when ``p`` is the zero vector (a constant).
    """
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    z_max = float(np.abs(z).max(initial=0.0))
    if z_max == 0:
        raise ConstantProtectedError("protected attribute is constant")
    p_max = float(np.abs(p).max(initial=0.0))
    if p_max == 0:
        return None
    # rescale before squaring so extreme units neither overflow nor underflow
    pn = p / p_max
    zn = z / z_max
    pn /= np.linalg.norm(pn)
    zn /= np.linalg.norm(zn)
    return min(1.0, float(pn @ zn) ** 2)


def vector_influence(p, model_variance: float) -> float:
    """Var(P) / Var(Y_hat) for an embedded vector ``p``."""
    if model_variance <= 0:
        raise DegenerateModelError("model output has zero variance")
    p = np.asarray(p, dtype=float)
    return float(p @ p) / model_variance


def influence(alphas, prob: EmbeddedProblem) -> float:
    return vector_influence(prob.component(alphas), prob.model_variance)


def evaluate(alphas, prob: EmbeddedProblem) -> Component:
    """Build the component for ``alphas`` and compute its metrics."""
    alphas = np.asarray(alphas, dtype=float)
    p = prob.component(alphas)
    return Component(
        alphas, association(p, prob.z), vector_influence(p, prob.model_variance)
    )


def is_proxy(comp: Component, th: Thresholds) -> bool:
    if comp.association is None:
        return False
    return (
        comp.association >= th.epsilon - th.tolerance
        and comp.influence >= th.delta - th.tolerance
    )


def input_association(prob: EmbeddedProblem, index: int) -> float:
    """Association of the unscaled input ``index`` with Z (0 if constant)."""
    value = association(prob.vectors[:, index], prob.z)
    return 0.0 if value is None else value


def exemption_status(
    comp: Component, prob: EmbeddedProblem, th: Thresholds, exempt_index: int
) -> ExemptionStatus:
    """Classify a component under a single exempt input."""
    if not 0 <= exempt_index < prob.n:
        raise IndexError(f"exempt index {exempt_index} out of range for {prob.n} inputs")
    if not is_proxy(comp, th):
        return ExemptionStatus.NOT_A_PROXY
    without = comp.alphas.copy()
    without[exempt_index] = 0.0
    if is_proxy(evaluate(without, prob), th):
        return ExemptionStatus.NONEXEMPT
    if comp.association < input_association(prob, exempt_index) + th.epsilon_prime:
        return ExemptionStatus.EXEMPT
    return ExemptionStatus.NONEXEMPT


def _binary_groups(yhat: Sequence[float], z: Sequence[float]):
    yhat = np.asarray(yhat, dtype=float)
    z = np.asarray(z, dtype=float)
    if yhat.shape != z.shape or yhat.ndim != 1:
        raise DataError("prediction and protected series must be 1-d and equal length")
    levels = np.unique(z)
    if levels.size != 2 or not np.array_equal(levels, [0.0, 1.0]):
        raise DataError("protected attribute must take both values 0 and 1")
    return yhat, z


def demographic_parity_gap(yhat: Sequence[float], z: Sequence[float]) -> float:
    """E[Y_hat | Z = 0] - E[Y_hat | Z = 1] over the sample."""
    yhat, z = _binary_groups(yhat, z)
    return float(yhat[z == 0].mean() - yhat[z == 1].mean())


def parity_association_identity(yhat: Sequence[float], z: Sequence[float]) -> float:
    """|Asc(Y_hat, Z) - gap^2 Var(Z) / Var(Y_hat)| with sample moments.

    Zero in exact arithmetic for binary Z; the return value is the
    floating-point residual.
    """
    yhat, z = _binary_groups(yhat, z)
    m = yhat.size
    yc = yhat - yhat.mean()
    zc = z - z.mean()
    var_y = float(yc @ yc) / (m - 1)
    if var_y <= 0:
        raise DegenerateModelError("predictions have zero variance")
    var_z = float(zc @ zc) / (m - 1)
    cov = float(yc @ zc) / (m - 1)
    lhs = cov**2 / (var_y * var_z)
    gap = demographic_parity_gap(yhat, z)
    return abs(lhs - gap**2 * var_z / var_y)
