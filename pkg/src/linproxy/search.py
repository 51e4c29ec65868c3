"""Proxy detection: exact and approximate searches, exemption, sweeps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Sequence

from .cone import ConeInstance, solve_linear, solve_norm_max
from .embedding import EmbeddedProblem
from .errors import DegenerateModelError
from .metrics import Component, Thresholds, evaluate, input_association, is_proxy


class Verdict(str, enum.Enum):
    PROXY_FOUND = "proxy-found"
    POTENTIAL = "potential-proxy-use"
    NONE = "no-proxy-use"


SIDES = (1, -1)


@dataclass(frozen=True, eq=False)
class AuditFinding:
    """Outcome of one detection run.

    ``epsilon`` is the cone threshold the witness was searched under (raised
    above the requested threshold for nonexempt searches). ``approx_estimate``
    is (c^T alpha)^2 / Var(Y_hat) when the approximate path produced it.
    """

    verdict: Verdict
    witness: Component | None = None
    side: int | None = None
    approx_estimate: float | None = None
    mode: str = "general"
    method: str = "approx"
    epsilon: float | None = None

    def __post_init__(self):
        if self.verdict is Verdict.NONE and self.witness is not None:
            raise ValueError("a no-proxy-use finding cannot carry a witness")
        if self.verdict is Verdict.PROXY_FOUND and self.witness is None:
            raise ValueError("a proxy-found finding needs a witness")


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    exact_influence: float
    approx_estimate: float
    approx_actual_influence: float
    exact_side: int | None = None
    approx_side: int | None = None


class _Branch:
    """All solves for one cone threshold and one set of pinned inputs."""

    def __init__(
        self, prob: EmbeddedProblem, th: Thresholds, fixed_zero=(), seed: int = 0, starts=None
    ):
        self.prob = prob
        self.th = th
        self.fixed_zero = frozenset(fixed_zero)
        self.seed = seed
        # side -> extra starting points for the exact search
        self.starts = starts or {}

    def _instance(self, side: int) -> ConeInstance:
        return ConeInstance(self.prob, self.th.epsilon, side, self.fixed_zero)

    @cached_property
    def exact(self) -> list[tuple[int, Component]]:
        return [
            (
                s,
                evaluate(
                    solve_norm_max(
                        self._instance(s), seed=self.seed, extra_starts=self.starts.get(s, ())
                    ).alphas,
                    self.prob,
                ),
            )
            for s in SIDES
        ]

    @cached_property
    def approx(self) -> list[tuple[int, Component, float]]:
        out = []
        for s in SIDES:
            res = solve_linear(self._instance(s), self.prob.c)
            estimate = res.objective**2 / self.prob.model_variance
            out.append((s, evaluate(res.alphas, self.prob), estimate))
        return out


def _beats(new: float, old: float, tol: float) -> bool:
    """Strictly better by more than the comparison tolerance.

    Earlier candidates (s = +1, then the pinned branch) win near-ties, so
    floating-point noise cannot flip the reported side.
    """
    return new > old + tol * max(1.0, abs(old))


def _check(prob: EmbeddedProblem) -> None:
    if prob.model_variance <= 0:
        raise DegenerateModelError("model output has zero variance")


def _exact_finding(branches: Sequence[_Branch], mode: str) -> AuditFinding:
    best = None
    for branch in branches:
        for side, comp in branch.exact:
            if is_proxy(comp, branch.th) and (
                best is None or _beats(comp.influence, best[1].influence, branch.th.tolerance)
            ):
                best = (side, comp, branch.th.epsilon)
    if best is None:
        return AuditFinding(Verdict.NONE, mode=mode, method="exact")
    side, comp, eps = best
    return AuditFinding(
        Verdict.PROXY_FOUND, comp, side, mode=mode, method="exact", epsilon=eps
    )


def _approx_finding(branches: Sequence[_Branch], mode: str) -> AuditFinding:
    proxy = None
    potential = None
    for branch in branches:
        for side, comp, estimate in branch.approx:
            # estimate >= delta  <=>  c^T alpha >= sqrt(delta Var(Y_hat))
            if estimate < branch.th.delta - branch.th.tolerance:
                continue
            item = (side, comp, estimate, branch.th.epsilon)
            if is_proxy(comp, branch.th):
                if proxy is None or _beats(comp.influence, proxy[1].influence, branch.th.tolerance):
                    proxy = item
            elif potential is None or _beats(estimate, potential[2], branch.th.tolerance):
                potential = item
    if proxy is not None:
        side, comp, estimate, eps = proxy
        return AuditFinding(Verdict.PROXY_FOUND, comp, side, estimate, mode, "approx", eps)
    if potential is not None:
        side, comp, estimate, eps = potential
        return AuditFinding(Verdict.POTENTIAL, comp, side, estimate, mode, "approx", eps)
    return AuditFinding(Verdict.NONE, mode=mode, method="approx")


def _nonexempt_branches(
    prob: EmbeddedProblem, th: Thresholds, exempt_index: int, seed: int, carry=None
) -> list[_Branch]:
    if not 0 <= exempt_index < prob.n:
        raise IndexError(f"exempt index {exempt_index} out of range for {prob.n} inputs")
    # proxies without the exempt input come first so that ties keep them
    carry = carry or {}
    pinned = frozenset({exempt_index})
    branches = [_Branch(prob, th, pinned, seed, carry.get(pinned))]
    raised = max(th.epsilon, input_association(prob, exempt_index) + th.epsilon_prime)
    if raised <= 1:
        branches.append(_Branch(prob, replace(th, epsilon=raised), (), seed, carry.get(frozenset())))
    return branches


def _finding(branches, mode: str, method: str) -> AuditFinding:
    if method == "exact":
        return _exact_finding(branches, mode)
    if method == "approx":
        return _approx_finding(branches, mode)
    raise ValueError(f"unknown method {method!r}")


def detect_exact(
    prob: EmbeddedProblem, th: Thresholds, *, fixed_zero: Iterable[int] = (), seed: int = 0
) -> AuditFinding:
    """Search both cone sides for the most influential qualifying component.

    Exact up to the local-search guarantee of :func:`solve_norm_max`.
    """
    _check(prob)
    return _exact_finding([_Branch(prob, th, fixed_zero, seed)], "general")


def detect_approx(
    prob: EmbeddedProblem, th: Thresholds, *, fixed_zero: Iterable[int] = ()
) -> AuditFinding:
    """Linear relaxation search; a no-proxy-use verdict is always sound."""
    _check(prob)
    return _approx_finding([_Branch(prob, th, fixed_zero)], "general")


def detect_nonexempt(
    prob: EmbeddedProblem,
    th: Thresholds,
    exempt_index: int,
    *,
    method: str = "approx",
    seed: int = 0,
) -> AuditFinding:
    """Look for proxies that the exempt input cannot excuse.

    Two searches per side: one with the exempt coefficient pinned to zero,
    and one with the association threshold raised to
    max(epsilon, Asc(X_exempt, Z) + epsilon_prime).
    """
    _check(prob)
    return _finding(_nonexempt_branches(prob, th, exempt_index, seed), "nonexempt", method)


def _row(epsilon: float, branches: Sequence[_Branch]) -> SweepRow:
    exact_inf, exact_side = 0.0, None
    est, actual, approx_side = 0.0, 0.0, None
    for b in branches:
        tol = b.th.tolerance
        for side, comp in b.exact:
            if comp.association is not None and _beats(comp.influence, exact_inf, tol):
                exact_inf, exact_side = comp.influence, side
        for side, comp, estimate in b.approx:
            if approx_side is None and estimate > 0 or _beats(estimate, est, tol):
                est, actual, approx_side = estimate, comp.influence, side
    return SweepRow(epsilon, exact_inf, est, actual, exact_side, approx_side)


@dataclass(frozen=True, eq=False)
class SweepPoint:
    """One threshold of a sweep: the table row plus both findings."""

    row: SweepRow
    exact: AuditFinding
    approx: AuditFinding


def sweep_points(
    prob: EmbeddedProblem,
    epsilons: Sequence[float],
    th: Thresholds,
    *,
    mode: str = "general",
    exempt_index: int | None = None,
    seed: int = 0,
) -> list[SweepPoint]:
    """Solve every threshold in ``epsilons`` once, reporting rows and findings."""
    _check(prob)
    if mode not in ("general", "nonexempt"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    if mode == "nonexempt" and exempt_index is None:
        raise ValueError("a nonexempt sweep needs an exempt input")
    eps = [float(e) for e in epsilons]
    if any(not 0 < e <= 1 for e in eps):
        raise ValueError("sweep thresholds must lie in (0, 1]")
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise ValueError("sweep thresholds must be ascending")
    # Solve from the strictest threshold down. A witness at a higher threshold
    # is feasible at every lower one, so seeding the next search with it keeps
    # exact influence non-increasing along the sweep.
    carry: dict[frozenset, dict[int, list]] = {}
    points = []
    for e in reversed(eps):
        at = replace(th, epsilon=e)
        if mode == "general":
            branches = [_Branch(prob, at, (), seed, carry.get(frozenset()))]
        else:
            branches = _nonexempt_branches(prob, at, exempt_index, seed, carry)
        points.append(
            SweepPoint(
                _row(e, branches),
                _exact_finding(branches, mode),
                _approx_finding(branches, mode),
            )
        )
        for b in branches:
            carry[b.fixed_zero] = {side: [comp.alphas] for side, comp in b.exact}
    return points[::-1]


def sweep(
    prob: EmbeddedProblem,
    epsilons: Sequence[float],
    th: Thresholds,
    *,
    mode: str = "general",
    exempt_index: int | None = None,
    seed: int = 0,
) -> list[SweepRow]:
    """Table of exact influence, approximate estimate and its actual influence."""
    return [
        p.row
        for p in sweep_points(prob, epsilons, th, mode=mode, exempt_index=exempt_index, seed=seed)
    ]

