"""Detect proxy use of a protected attribute in linear regression models."""

from .audit import AuditConfig, fit_ols, ingest, run_audit
from .cone import ConeInstance, SolveResult, Status, solve_linear, solve_norm_max
from .dataset import Dataset
from .embedding import CovarianceMatrix, EmbeddedProblem, embed, estimate_covariance, psd_decompose
from .errors import (
    AuditError,
    ConstantProtectedError,
    DataError,
    DegenerateModelError,
    NotCovarianceError,
    ProxyAuditError,
    SolverError,
)
from .metrics import (
    Component,
    ExemptionStatus,
    LinearModel,
    Thresholds,
    association,
    demographic_parity_gap,
    evaluate,
    exemption_status,
    influence,
    is_proxy,
    parity_association_identity,
    vector_influence,
)
from .oracle import GridSpec, OracleResult, grid_best, grid_has_proxy
from .report import AuditReport, emit_report, load_schema, parse_report
from .search import (
    AuditFinding,
    SweepRow,
    Verdict,
    detect_approx,
    detect_exact,
    detect_nonexempt,
    sweep,
)

__version__ = "0.1.0"
