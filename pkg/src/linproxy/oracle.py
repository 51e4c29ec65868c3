"""Brute-force certification by exhaustive grid search over components.

Only meant for small models. Every grid point alpha in {0, h, ..., 1}^n is
evaluated directly from its association and influence; nothing here shares
code with the cone solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddedProblem
from .metrics import Thresholds

MAX_EVALUATIONS = 10**8


@dataclass(frozen=True)
class GridSpec:
    resolution: float = 0.02
    max_inputs: int = 4

    def __post_init__(self):
        if not 0 < self.resolution <= 0.5:
            raise ValueError("grid resolution must lie in (0, 0.5]")
        if self.points_per_axis ** self.max_inputs > MAX_EVALUATIONS:
            raise ValueError("grid would exceed 1e8 evaluations")

    @property
    def points_per_axis(self) -> int:
        return int(round(1 / self.resolution)) + 1

    def axis(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.points_per_axis)


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Best qualifying grid point.

    ``norm_error`` bounds how far ||A' alpha|| at the nearest grid point can
    fall short of any off-grid point: (h / 2) * sum_i ||beta_i x_i||.
    """

    alphas: np.ndarray
    association: float
    influence: float
    norm_error: float


def grid_best(
    prob: EmbeddedProblem,
    epsilon: float,
    spec: GridSpec = GridSpec(),
    *,
    side: int | None = None,
    fixed_zero=(),
) -> OracleResult | None:
    """Max-influence grid component with association >= ``epsilon``.

    ``side`` restricts the sign of the correlation with Z; ``fixed_zero``
    pins coordinates to 0. Returns None if no nonconstant grid component
    qualifies.
    """
    n = prob.n
    if n > spec.max_inputs:
        raise ValueError(f"grid oracle limited to {spec.max_inputs} inputs, got {n}")
    if prob.model_variance <= 0:
        raise ValueError("model output has zero variance")
    axis = spec.axis()
    fixed = set(int(i) for i in fixed_zero)
    axes = [np.zeros(1) if i in fixed else axis for i in range(n)]
    m = np.asarray(prob.matrix)
    z = np.asarray(prob.z)
    zz = float(z @ z)

    best_pp = -1.0
    best_alpha = None
    # chunk on the first coordinate to bound memory
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, n - 1) if n > 1 else np.zeros((1, 0))
    for first in axes[0]:
        alphas = np.hstack([np.full((rest.shape[0], 1), first), rest])
        p = alphas @ m.T
        pp = np.einsum("ij,ij->i", p, p)
        pz = p @ z
        ok = (pp > 0) & (pz * pz >= epsilon * pp * zz)
        if side is not None:
            ok &= side * pz > 0
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        j = idx[np.argmax(pp[idx])]
        if pp[j] > best_pp:
            best_pp = float(pp[j])
            best_alpha = alphas[j].copy()
    if best_alpha is None:
        return None
    p = m @ best_alpha
    pz = float(p @ z)
    return OracleResult(
        alphas=best_alpha,
        association=pz * pz / (best_pp * zz),
        influence=best_pp / prob.model_variance,
        norm_error=0.5 * spec.resolution * float(np.linalg.norm(m, axis=0).sum()),
    )


def grid_has_proxy(
    prob: EmbeddedProblem, th: Thresholds, spec: GridSpec = GridSpec(), *, fixed_zero=()
) -> bool:
    best = grid_best(prob, th.epsilon, spec, fixed_zero=fixed_zero)
    return best is not None and best.influence >= th.delta
