import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from instances import problem_from, random_instance
from linproxy import (
    AuditFinding,
    ExemptionStatus,
    Thresholds,
    Verdict,
    detect_approx,
    detect_exact,
    detect_nonexempt,
    exemption_status,
    grid_best,
    is_proxy,
    sweep,
)
from linproxy.search import sweep_points


def unit_problem(cov_z1=0.9, cov_12=0.0, beta=(1.0, 1.0)):
    sigma = np.array([[1.0, cov_z1, 0.0], [cov_z1, 1.0, cov_12], [0.0, cov_12, 1.0]])
    return problem_from(sigma, np.array(beta))


def self_problem():
    return problem_from(np.ones((2, 2)), np.array([1.0]))


def orthogonal_problem(n=3):
    return problem_from(np.eye(n + 1), np.ones(n))


def counterexample():
    # Var(X1)=2, Var(X2)=1, Cov(X1,X2)=-1, Z = X1 + X2
    sigma = np.array([[1.0, 1.0, 0.0], [1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    return problem_from(sigma, np.array([1.0, 1.0]))


class TestDetectExact:
    def test_self(self):
        f = detect_exact(self_problem(), Thresholds(1.0, 1.0))
        assert f.verdict is Verdict.PROXY_FOUND
        np.testing.assert_allclose(f.witness.alphas, [1.0])
        assert f.side == 1

    def test_association_out_of_reach(self):
        prob = unit_problem()
        assert grid_best(prob, 0.9) is None
        assert detect_exact(prob, Thresholds(0.9, 0.05)).verdict is Verdict.NONE

    def test_closed_form_proxy(self):
        prob = unit_problem()
        f = detect_exact(prob, Thresholds(0.5, 0.4))
        assert f.verdict is Verdict.PROXY_FOUND
        # (1, 0) qualifies with influence 0.5, so the best is at least that
        assert f.witness.influence >= 0.5 - 1e-12
        assert f.witness.association >= 0.5 - 1e-8
        assert grid_best(prob, 0.5).influence >= 0.5

    def test_negative_side(self):
        prob = unit_problem(cov_z1=-0.9)
        f = detect_exact(prob, Thresholds(0.5, 0.4))
        assert f.verdict is Verdict.PROXY_FOUND and f.side == -1

    def test_tie_goes_to_positive_side(self):
        # X1 and X2 mirror each other around Z
        sigma = np.array([[1.0, 0.5, -0.5], [0.5, 1.0, 0.0], [-0.5, 0.0, 1.0]])
        f = detect_exact(problem_from(sigma, np.array([1.0, 1.0])), Thresholds(0.2, 0.1))
        assert f.verdict is Verdict.PROXY_FOUND and f.side == 1


class TestDetectApprox:
    def test_self(self):
        f = detect_approx(self_problem(), Thresholds(1.0, 1.0))
        assert f.verdict is Verdict.PROXY_FOUND
        assert f.approx_estimate == pytest.approx(1.0)

    def test_orthogonal(self):
        for eps in (0.01, 0.5, 1.0):
            f = detect_approx(orthogonal_problem(), Thresholds(eps, 0.01))
            assert f.verdict is Verdict.NONE and f.witness is None

    def test_potential_proxy(self):
        # Y_hat = X1 - X2 with X1, X2 strongly correlated: c^T alpha overstates ||A' alpha||
        sigma = np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.8], [0.2, 0.8, 1.0]])
        prob = problem_from(sigma, np.array([1.0, -1.0]))
        th = Thresholds(0.3, 1.0)
        f = detect_approx(prob, th)
        assert f.verdict is Verdict.POTENTIAL
        assert f.approx_estimate >= 1.0 > f.witness.influence
        # the full model itself qualifies, so the exact path and the oracle see a proxy
        assert detect_exact(prob, th).verdict is Verdict.PROXY_FOUND
        assert grid_best(prob, 0.3).influence >= 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31))
    def test_estimate_overapproximates(self, seed):
        prob, eps, delta = random_instance(seed)
        f = detect_approx(prob, Thresholds(eps, delta))
        if f.witness is not None:
            assert f.approx_estimate >= f.witness.influence - 1e-12
        if f.verdict is Verdict.PROXY_FOUND:
            assert is_proxy(f.witness, Thresholds(eps, delta))


class TestDetectNonexempt:
    @pytest.mark.parametrize("method", ["exact", "approx"])
    def test_only_exempt_input_is_associated(self, method):
        prob = unit_problem()
        th = Thresholds(0.5, 0.05, epsilon_prime=0.05)
        f = detect_nonexempt(prob, th, 0, method=method)
        assert f.verdict is Verdict.NONE
        # both branches are empty on the oracle as well
        assert grid_best(prob, 0.5, fixed_zero={0}) is None
        assert grid_best(prob, 0.86) is None

    @pytest.mark.parametrize("method", ["exact", "approx"])
    def test_counterexample(self, method):
        prob = counterexample()
        th = Thresholds(0.5, 1.0, epsilon_prime=0.1)
        f = detect_nonexempt(prob, th, 0, method=method)
        assert f.verdict is Verdict.PROXY_FOUND
        assert f.witness.association >= 0.6 - 1e-8
        assert f.epsilon == pytest.approx(0.6)
        assert exemption_status(f.witness, prob, th, 0) is ExemptionStatus.NONEXEMPT

    @pytest.mark.parametrize("method", ["exact", "approx"])
    def test_zero_coefficient_exempt(self, method):
        sigma = np.array([[1.0, 0.5, 0.4], [0.5, 1.0, 0.2], [0.4, 0.2, 1.0]])
        prob = problem_from(sigma, np.array([0.0, 1.0]))
        th = Thresholds(0.1, 0.2)
        plain = (detect_exact if method == "exact" else detect_approx)(prob, th)
        f = detect_nonexempt(prob, th, 0, method=method)
        assert f.verdict is plain.verdict
        assert f.witness.influence == pytest.approx(plain.witness.influence, rel=1e-9)

    def test_bad_index(self):
        with pytest.raises(IndexError):
            detect_nonexempt(unit_problem(), Thresholds(0.5, 0.5), 2)

    def test_bad_method(self):
        with pytest.raises(ValueError):
            detect_nonexempt(unit_problem(), Thresholds(0.5, 0.5), 0, method="bogus")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31))
    def test_nonexempt_implies_general(self, seed):
        prob, eps, delta = random_instance(seed)
        th = Thresholds(eps, delta)
        k = seed % prob.n
        if detect_nonexempt(prob, th, k, method="exact").verdict is Verdict.PROXY_FOUND:
            assert detect_exact(prob, th).verdict is Verdict.PROXY_FOUND
        if detect_nonexempt(prob, th, k, method="approx").verdict is not Verdict.NONE:
            assert detect_approx(prob, th).verdict is not Verdict.NONE


class TestFinding:
    def test_none_has_no_witness(self):
        f = detect_exact(orthogonal_problem(), Thresholds(0.5, 0.5))
        with pytest.raises(ValueError):
            AuditFinding(Verdict.NONE, witness=detect_exact(self_problem(), Thresholds(1, 1)).witness)
        assert f.witness is None

    def test_proxy_needs_witness(self):
        with pytest.raises(ValueError):
            AuditFinding(Verdict.PROXY_FOUND)


class TestSweep:
    EPS = [0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0]

    def test_beyond_reach_is_zero(self):
        rows = sweep(unit_problem(), [0.5, 0.9, 0.95], Thresholds(0.5, 0.05))
        for r in rows[1:]:
            assert (r.exact_influence, r.approx_estimate, r.approx_actual_influence) == (0, 0, 0)
            assert r.exact_side is None and r.approx_side is None

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    @example(329)  # a cold start at 0.2 once found less than the witness at 0.4
    def test_rows(self, seed):
        prob, _, delta = random_instance(seed)
        rows = sweep(prob, self.EPS, Thresholds(0.5, delta))
        assert [r.epsilon for r in rows] == self.EPS
        for r in rows:
            assert r.exact_influence >= 0 and r.approx_actual_influence >= 0
            assert r.approx_estimate >= r.approx_actual_influence - 1e-12
        for a, b in zip(rows, rows[1:]):
            assert b.exact_influence <= a.exact_influence * (1 + 1e-9) + 1e-12
            assert b.approx_estimate <= a.approx_estimate * (1 + 1e-8) + 1e-12

    def test_sweep_matches_oracle_decay(self):
        prob, _, _ = random_instance(17, sizes=(3,))
        rows = sweep(prob, self.EPS, Thresholds(0.5, 0.5))
        for r in rows:
            best = grid_best(prob, r.epsilon)
            oracle = 0.0 if best is None else best.influence
            assert r.exact_influence >= oracle * 0.98

    def test_points_carry_findings(self):
        points = sweep_points(unit_problem(), [0.5, 0.9], Thresholds(0.5, 0.4))
        assert points[0].exact.verdict is Verdict.PROXY_FOUND
        assert points[1].exact.verdict is Verdict.NONE

    def test_nonexempt_mode(self):
        rows = sweep(counterexample(), [0.1, 0.5], Thresholds(0.5, 0.5), mode="nonexempt", exempt_index=0)
        assert len(rows) == 2

    @pytest.mark.parametrize(
        "eps, kwargs",
        [
            ([0.5, 0.2], {}),
            ([0.0, 0.2], {}),
            ([0.5, 1.2], {}),
            ([0.5], {"mode": "nonexempt"}),
            ([0.5], {"mode": "other"}),
        ],
    )
    def test_validation(self, eps, kwargs):
        with pytest.raises(ValueError):
            sweep(unit_problem(), eps, Thresholds(0.5, 0.5), **kwargs)
