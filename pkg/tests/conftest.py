import functools

import numpy as np
import pytest

import linproxy
from linproxy import cone, search

ENVELOPE_TOL = 1e-12

# criterion -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
ENVELOPE = {"checked": 0, "violations": 0, "worst": -np.inf}


def _check_envelope(inst, result):
    """c^T alpha >= ||A' alpha|| - 1e-12 for one solver output."""
    prob = inst.problem
    a = np.asarray(result.alphas, dtype=float)
    excess = float(np.linalg.norm(prob.matrix @ a) - prob.c @ a)
    ENVELOPE["checked"] += 1
    ENVELOPE["worst"] = max(ENVELOPE["worst"], excess)
    if excess > ENVELOPE_TOL:
        ENVELOPE["violations"] += 1
        raise AssertionError(f"c^T alpha below ||A' alpha|| by {excess:.3e}")


def _watch_maximize(method):
    @functools.wraps(method)
    def wrapper(self, objective):
        result = method(self, objective)
        _check_envelope(self.inst, result)
        return result

    return wrapper


def _watch_norm_max(fn):
    @functools.wraps(fn)
    def wrapper(inst, **kwargs):
        result = fn(inst, **kwargs)
        _check_envelope(inst, result)
        return result

    return wrapper


# Installed at import so every later `from linproxy import ...` sees the
# watched versions; this is how the envelope covers every solver output.
cone._CompiledCone.maximize = _watch_maximize(cone._CompiledCone.maximize)
_norm_max = _watch_norm_max(cone.solve_norm_max)
cone.solve_norm_max = search.solve_norm_max = linproxy.solve_norm_max = _norm_max


@pytest.fixture
def record_acceptance():
    def record(criterion: int, passed: bool | None, detail: str):
        ACCEPTANCE[criterion] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE and not ENVELOPE["checked"]:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        label = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        tr.write_line(f"{label}  criterion {k}: {detail}")
    v = ENVELOPE["violations"]
    tr.write_line(
        f"{'PASS' if v == 0 else 'FAIL'}  criterion 5 (session-wide): "
        f"{ENVELOPE['checked']} solver outputs checked, {v} violations, "
        f"worst excess {ENVELOPE['worst']:.2e}"
    )
