"""Optimization over components that satisfy the association cone.

The feasible set for threshold ``epsilon`` and side ``s`` is

    { alpha : 0 <= alpha <= 1,  ||A' alpha|| <= s * z^T A' alpha / (sqrt(epsilon) ||z||) }

whose nonzero members are exactly the components with association at least
``epsilon`` and correlation sign ``s``. Linear objectives over this set form a
second-order cone program, solved here with Clarabel. Maximizing
||A' alpha||^2 is a convex maximization and is handled by repeated
linearization from many starting points.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from .embedding import EmbeddedProblem
from .errors import ConstantProtectedError, SolverError

GAP_RTOL = 1e-8
FEAS_RTOL = 1e-8
SNAP = 1e-9


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    STATIONARY = "stationary"
    TRIVIAL = "trivial"


@dataclass(frozen=True, eq=False)
class ConeInstance:
    problem: EmbeddedProblem
    epsilon: float
    side: int = 1
    fixed_zero: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        if self.problem.z_norm == 0:
            raise ConstantProtectedError("protected attribute is constant")
        fixed = frozenset(int(i) for i in self.fixed_zero)
        if any(not 0 <= i < self.problem.n for i in fixed):
            raise IndexError(f"fixed-zero index out of range: {sorted(fixed)}")
        object.__setattr__(self, "fixed_zero", fixed)

    @property
    def feasibility_tolerance(self) -> float:
        return FEAS_RTOL * max(1.0, self.problem.spectral_norm)

    def violation(self, alphas) -> float:
        """Amount by which ``alphas`` exceeds the cone constraint (<= 0 inside)."""
        p = self.problem.component(alphas)
        bound = self.side * float(self.problem.z @ p)
        bound /= math.sqrt(self.epsilon) * self.problem.z_norm
        return math.sqrt(float(p @ p)) - bound

    def feasible(self, alphas, tol: float | None = None) -> bool:
        """Box, fixed-zero and cone membership (cone within ``tol``)."""
        if tol is None:
            tol = self.feasibility_tolerance
        a = np.asarray(alphas, dtype=float)
        if np.any(a < -SNAP) or np.any(a > 1 + SNAP):
            return False
        if any(a[i] != 0 for i in self.fixed_zero):
            return False
        return self.violation(a) <= tol


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Solver output.

    ``violation`` is the cone constraint excess of ``alphas`` (<= 0 when
    strictly inside) and ``gap`` a certified upper bound on the distance to
    the optimum; NaN for the nonconvex mode.
    """

    alphas: np.ndarray
    objective: float
    status: Status
    violation: float
    gap: float = math.nan
    solves: int = 1


def _clarabel_settings():
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = 1e-10
    settings.tol_gap_rel = 1e-10
    settings.tol_feas = 1e-10
    settings.max_iter = 200
    settings.presolve_enable = False
    return settings


# Re-solve recipes tried in order when the default run cannot be certified;
# each changes the linear algebra rather than the problem.
FALLBACKS = (
    {"equilibrate_enable": False},
    {
        "static_regularization_constant": 1e-10,
        "iterative_refinement_reltol": 1e-14,
        "iterative_refinement_abstol": 1e-14,
        "iterative_refinement_max_iter": 50,
    },
)


class _CompiledCone:
    """Clarabel data for one instance, reused across objectives."""

    def __init__(self, inst: ConeInstance):
        self.inst = inst
        prob = inst.problem
        c = prob.c
        fixed = inst.fixed_zero
        self.free = np.array([i for i in range(prob.n) if i not in fixed and c[i] > 0], int)
        self.loose = np.array([i for i in range(prob.n) if i not in fixed and c[i] == 0], int)
        self._solver = None
        nf = self.free.size
        if nf == 0:
            return
        self.mf = prob.matrix[:, self.free]
        zhat = prob.z / prob.z_norm
        # cone test on free coordinates only; loose columns are zero vectors
        self.w = inst.side * (self.mf.T @ zhat) / math.sqrt(inst.epsilon)
        m = self.mf / c[self.free].max()
        self.g = inst.side * (m.T @ zhat) / math.sqrt(inst.epsilon)
        self.r = np.linalg.qr(m, mode="r") if m.shape[0] > nf else m
        k = self.r.shape[0]
        eye = sp.identity(nf, format="csc")
        self.a = sp.vstack(
            [-eye, eye, sp.csc_matrix(-self.g[None, :]), sp.csc_matrix(-self.r)], format="csc"
        )
        self.b = np.concatenate([np.zeros(nf), np.ones(nf), np.zeros(1 + k)])
        self.cones = [clarabel.NonnegativeConeT(2 * nf), clarabel.SecondOrderConeT(k + 1)]

    def _run(self, q: np.ndarray, overrides: dict | None = None):
        if overrides is not None:
            settings = _clarabel_settings()
            for key, value in overrides.items():
                setattr(settings, key, value)
            return clarabel.DefaultSolver(self._p(), q, self.a, self.b, self.cones, settings).solve()
        if self._solver is None:
            self._solver = clarabel.DefaultSolver(
                self._p(), q, self.a, self.b, self.cones, _clarabel_settings()
            )
        else:
            self._solver.update(q=q)
        return self._solver.solve()

    def _p(self):
        nf = self.free.size
        return sp.csc_matrix((nf, nf))

    def _bound(self, of: np.ndarray, dual: np.ndarray) -> float:
        # Any (u, v) in the second-order cone gives u g^T a + v^T R a >= 0 on
        # the feasible set, so sum_i max(0, (of + u g + R^T v)_i) bounds of^T a.
        nf = self.free.size
        u, v = dual[2 * nf], dual[2 * nf + 1 :]
        u = max(u, float(np.linalg.norm(v)), 0.0)
        return float(np.clip(of + u * self.g + self.r.T @ v, 0.0, None).sum())

    def _violation_of(self, x: np.ndarray) -> float:
        p = self.mf @ x
        return math.sqrt(float(p @ p)) - float(self.w @ x)

    def _candidate(self, of: np.ndarray, sol) -> tuple[np.ndarray, float]:
        """Feasible free-coordinate point from a solver run, and its dual bound."""
        x = np.clip(np.asarray(sol.x, dtype=float), 0.0, 1.0)
        snapped = np.where(x < SNAP, 0.0, np.where(x > 1 - SNAP, 1.0, x))
        if self._violation_of(snapped) <= max(0.0, self._violation_of(x)):
            x = snapped
        # a nonzero optimum can always be rescaled until some alpha_i = 1,
        # so a tiny iterate means the optimum is the apex
        if x.max() <= 1e-6:
            x = np.zeros_like(x)
        elif self._violation_of(x) > 0:
            alphas = np.zeros(self.inst.problem.n)
            alphas[self.free] = x
            x = self._repair(alphas)[self.free]
        return x, self._bound(of, np.asarray(sol.z, dtype=float))

    def maximize(self, objective) -> SolveResult:
        inst = self.inst
        o = np.asarray(objective, dtype=float).reshape(-1)
        if o.size != inst.problem.n or not np.all(np.isfinite(o)):
            raise ValueError("objective must be a finite vector with one entry per input")
        alphas = np.zeros(inst.problem.n)
        alphas[self.loose] = (o[self.loose] > 0).astype(float)
        gap = 0.0
        status_text = "no free inputs"
        of = o[self.free]
        oscale = float(np.abs(of).max(initial=0.0))
        if oscale > 0:
            of = of / oscale
            best_x, best_value, bound = np.zeros(self.free.size), 0.0, math.inf
            tol = inst.feasibility_tolerance
            statuses = []
            for overrides in (None,) + FALLBACKS:
                sol = self._run(-of, overrides)
                statuses.append(str(sol.status))
                x, b = self._candidate(of, sol)
                if float(of @ x) > best_value and self._violation_of(x) <= tol:
                    best_x, best_value = x, float(of @ x)
                # every dual point gives a valid bound, so keep the tightest
                bound = min(bound, b)
                gap = max(0.0, bound - best_value) * oscale
                if gap <= GAP_RTOL * max(1.0, abs(best_value * oscale)):
                    break
            alphas[self.free] = best_x
            status_text = "/".join(statuses)
        value = float(o @ alphas)
        violation = inst.violation(alphas)
        result = SolveResult(
            alphas,
            value,
            Status.TRIVIAL if not alphas.any() else Status.OPTIMAL,
            violation,
            gap,
        )
        if violation > inst.feasibility_tolerance or gap > GAP_RTOL * max(1.0, abs(value)):
            raise SolverError(
                f"conic solve not certified (solver status {status_text}, "
                f"gap {gap:.2e}, cone violation {violation:.2e})",
                best=result,
            )
        return result

    def _interior(self) -> np.ndarray | None:
        """Box point minimizing ||R a|| - g^T a, if strictly inside the cone."""
        if not hasattr(self, "_interior_point"):
            nf = self.free.size
            k = self.r.shape[0]
            # variables (a, t): minimize t - g^T a subject to ||R a|| <= t
            eye = sp.identity(nf, format="csc")
            zcol = sp.csc_matrix((nf, 1))
            a = sp.vstack(
                [
                    sp.hstack([-eye, zcol]),
                    sp.hstack([eye, zcol]),
                    sp.hstack([sp.csc_matrix((1, nf)), sp.csc_matrix([[-1.0]])]),
                    sp.hstack([sp.csc_matrix(-self.r), sp.csc_matrix((k, 1))]),
                ],
                format="csc",
            )
            b = np.concatenate([np.zeros(nf), np.ones(nf), np.zeros(1 + k)])
            q = np.concatenate([-self.g, [1.0]])
            cones = [clarabel.NonnegativeConeT(2 * nf), clarabel.SecondOrderConeT(k + 1)]
            sol = clarabel.DefaultSolver(
                sp.csc_matrix((nf + 1, nf + 1)), q, a, b, cones, _clarabel_settings()
            ).solve()
            point = np.zeros(self.inst.problem.n)
            point[self.free] = np.clip(np.asarray(sol.x[:nf]), 0.0, 1.0)
            self._interior_point = point if self.inst.violation(point) < 0 else None
        return self._interior_point

    def _repair(self, alphas: np.ndarray) -> np.ndarray:
        """Pull a marginally infeasible point into the cone.

        The constraint is convex, so mixing in a strictly interior point with
        weight phi / (phi - phi_interior) restores feasibility.
        """
        inner = self._interior()
        if inner is None:
            return alphas
        phi = self.inst.violation(alphas)
        phi_in = self.inst.violation(inner)
        t = phi / (phi - phi_in)
        for _ in range(60):
            mixed = (1 - t) * alphas + t * inner
            if self.inst.violation(mixed) <= 0:
                return mixed
            t = min(1.0, 2 * t)
        return alphas



def solve_linear(inst: ConeInstance, objective) -> SolveResult:
    """Maximize ``objective @ alpha`` over the feasible set of ``inst``.

    Raises SolverError (carrying the best iterate) if the optimum cannot be
    certified to a relative duality gap of 1e-8.
    """
    return _CompiledCone(inst).maximize(objective)


def solve_norm_max(
    inst: ConeInstance,
    *,
    seed: int = 0,
    random_starts: int = 8,
    max_iter: int = 100,
    rtol: float = 1e-8,
    extra_starts=(),
) -> SolveResult:
    """Locally maximize ||A' alpha||^2 over the feasible set of ``inst``.

    From each start, repeatedly maximize the linearization
    (A' alpha_k)^T A' alpha until the relative gain drops below ``rtol``.
    Starts are the unit vectors of usable inputs, the all-ones vector, the
    maximizer of c^T alpha, ``random_starts`` maximizers of random positive
    objectives, and any ``extra_starts``. The best point found is returned;
    it is stationary, not certified globally optimal.
    """
    prob = inst.problem
    m = prob.matrix
    n = prob.n
    cone = _CompiledCone(inst)
    rng = np.random.default_rng(seed)
    solves = 0
    # points whose continuation has already been followed; rounding merges
    # trajectories that differ only by solver noise
    visited: set[bytes] = set()

    def linear(obj) -> SolveResult:
        nonlocal solves
        solves += 1
        return cone.maximize(obj)

    def value(a) -> float:
        p = m @ a
        return float(p @ p)

    usable = list(cone.free)
    starts = []
    for i in usable:
        e = np.zeros(n)
        e[i] = 1.0
        starts.append(e)
    ones = np.zeros(n)
    ones[usable] = 1.0
    starts.append(ones)
    starts.append(linear(prob.c).alphas)
    for _ in range(random_starts):
        direction = np.zeros(n)
        direction[usable] = rng.random(len(usable))
        starts.append(linear(direction).alphas)
    starts.extend(np.asarray(s, dtype=float) for s in extra_starts)

    best = np.zeros(n)
    best_value = 0.0
    for start in starts:
        a = start
        f = value(a) if inst.feasible(a, tol=0.0) else -math.inf
        if f > best_value:
            best, best_value = a, f
        for _ in range(max_iter):
            key = (np.round(a, 7) + 0.0).tobytes()
            if key in visited:
                break
            visited.add(key)
            grad = m.T @ (m @ a)
            if not np.any(grad):
                break
            step = linear(grad)
            f_new = value(step.alphas)
            if f_new <= f:
                break
            gain = f_new - f
            a, f = step.alphas, f_new
            if gain <= rtol * abs(f_new):
                break
        if f > best_value:
            best, best_value = a, f

    best = np.array(best, dtype=float)
    return SolveResult(
        best,
        best_value,
        Status.TRIVIAL if not best.any() else Status.STATIONARY,
        inst.violation(best),
        solves=solves,
    )
