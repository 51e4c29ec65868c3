"""End-to-end audit: ingest, fit, embed, sweep, report."""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import Dataset, read_table
from .embedding import CovarianceMatrix, embed, estimate_covariance
from .errors import AuditError, DataError, DegenerateModelError, ProxyAuditError
from .metrics import (
    LinearModel,
    Thresholds,
    association,
    demographic_parity_gap,
    parity_association_identity,
)
from .report import (
    AuditReport,
    DatasetSummary,
    FindingRecord,
    ModelSummary,
    ParitySummary,
    WitnessTerm,
)
from .search import AuditFinding, sweep_points

DEFAULT_EPSILONS = tuple(round(0.01 * k, 2) for k in range(1, 11))
COLLINEAR_RTOL = 1e-10


@dataclass(frozen=True)
class AuditConfig:
    protected: str
    input_path: str | Path | None = None
    protected_pair: tuple[str, str] | None = None
    target: str | None = None
    model_path: str | Path | None = None
    features: tuple[str, ...] = ()
    exempt: str | None = None
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    delta: float = 0.05
    epsilon_prime: float = 0.05
    output_format: str = "json"
    seed: int = 0
    covariance_path: str | Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if (self.input_path is None) == (self.covariance_path is None):
            raise ValueError("give exactly one of an input CSV or a covariance matrix")
        if (self.target is None) == (self.model_path is None):
            raise ValueError("give exactly one of a target column or a model file")
        if self.covariance_path is not None and self.model_path is None:
            raise ValueError("a covariance matrix input needs a model file")
        if self.target is not None and not self.features:
            raise ValueError("fitting a model needs feature columns")
        named = [self.protected, *self.features] + ([self.target] if self.target else [])
        if len(set(named)) != len(named):
            raise ValueError("protected, target and feature columns must be distinct")
        if self.exempt is not None and self.features and self.exempt not in self.features:
            raise ValueError(f"exempt column {self.exempt!r} is not a feature")
        if not self.epsilons:
            raise ValueError("need at least one association threshold")
        if any(not 0 < e <= 1 for e in self.epsilons):
            raise ValueError("association thresholds must lie in (0, 1]")
        if list(self.epsilons) != sorted(self.epsilons):
            raise ValueError("association thresholds must be ascending")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.epsilon_prime < 0:
            raise ValueError("epsilon_prime must be nonnegative")
        if self.output_format not in ("json", "csv", "markdown"):
            raise ValueError(f"unknown output format {self.output_format!r}")


def ingest(config: AuditConfig, features: Sequence[str] | None = None) -> Dataset:
    """Read the configured CSV, keeping the protected, feature and target columns."""
    features = list(features if features is not None else config.features)
    numeric = features + ([config.target] if config.target else [])
    return read_table(config.input_path, numeric, config.protected, config.protected_pair)


def fit_ols(data: Dataset, target: str, features: Sequence[str]) -> tuple[LinearModel, float]:
    """Least-squares fit with intercept via QR of the centered design.

    Returns the model and its in-sample R^2.
    """
    features = list(features)
    x = data.matrix(features)
    y = data.numeric(target)
    m, n = x.shape
    if n == 0:
        raise DataError("no feature columns to fit")
    if m < n + 2:
        raise DataError(f"need at least {n + 2} rows to fit {n} features, got {m}")
    x_mean = x.mean(axis=0)
    y_mean = y.mean()
    xc = x - x_mean
    yc = y - y_mean
    ss_tot = float(yc @ yc)
    if ss_tot == 0:
        raise DegenerateModelError(f"target {target!r} is constant")
    q, r = np.linalg.qr(xc)
    col_norms = np.linalg.norm(xc, axis=0)
    diag = np.abs(np.diag(r))
    weak = [
        features[j]
        for j in range(n)
        if col_norms[j] == 0 or diag[j] <= COLLINEAR_RTOL * col_norms[j]
    ]
    if weak:
        raise DataError(
            "design matrix is rank deficient; consider dropping collinear or constant "
            f"column(s): {', '.join(weak)}"
        )
    beta = solve_triangular(r, q.T @ yc)
    resid = yc - xc @ beta
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return LinearModel(tuple(features), beta, float(y_mean - x_mean @ beta)), r2


class _Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextlib.contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        except AuditError:
            raise
        except (ProxyAuditError, ValueError, IndexError, OSError) as exc:
            raise AuditError(name, str(exc)) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


def _finding_record(epsilon: float, finding: AuditFinding, model: LinearModel) -> FindingRecord:
    comp = finding.witness
    witness = []
    if comp is not None:
        witness = [
            WitnessTerm(name, float(a), float(b))
            for name, a, b in zip(model.inputs, comp.alphas, model.coefficients)
        ]
    return FindingRecord(
        epsilon=epsilon,
        mode=finding.mode,
        method=finding.method,
        verdict=finding.verdict.value,
        side=finding.side,
        search_epsilon=finding.epsilon,
        association=None if comp is None else comp.association,
        influence=None if comp is None else comp.influence,
        approx_estimate=finding.approx_estimate,
        witness=witness,
    )


def _parity(data: Dataset | None, config: AuditConfig, model: LinearModel, prob) -> ParitySummary:
    asc_pred = association(prob.matrix.sum(axis=1), prob.z)
    if data is None:
        return ParitySummary(asc_pred)
    z = data.numeric(config.protected)
    yhat = model.predict(data)
    asc_target = None
    if config.target:
        y = data.numeric(config.target)
        yc, zc = y - y.mean(), z - z.mean()
        asc_target = float(yc @ zc) ** 2 / (float(yc @ yc) * float(zc @ zc))
    gap = residual = None
    if set(np.unique(z)) == {0.0, 1.0}:
        gap = demographic_parity_gap(yhat, z)
        residual = parity_association_identity(yhat, z)
    return ParitySummary(asc_pred, asc_target, gap, residual)


def run_audit(config: AuditConfig) -> AuditReport:
    """Run every phase; any failure raises AuditError naming the phase."""
    timer = _Timer()
    data = None
    r2 = None
    model = None

    if config.model_path is not None:
        with timer.phase("load_model"):
            model = LinearModel.from_csv(config.model_path)
            if config.features and tuple(config.features) != model.inputs:
                raise DataError("feature list does not match the model file")
            if config.exempt is not None and config.exempt not in model.inputs:
                raise DataError(f"exempt column {config.exempt!r} is not a model input")

    if config.input_path is not None:
        with timer.phase("ingest"):
            data = ingest(config, model.inputs if model is not None else None)
        if model is None:
            with timer.phase("fit"):
                model, r2 = fit_ols(data, config.target, config.features)

    with timer.phase("covariance"):
        columns = (config.protected,) + model.inputs
        if data is not None:
            sigma = estimate_covariance(data, columns)
        else:
            sigma = CovarianceMatrix.from_csv(config.covariance_path).select(columns)

    with timer.phase("embed"):
        prob = embed(model, sigma)
        if prob.model_variance <= 0:
            raise DegenerateModelError("model output has zero variance")

    with timer.phase("parity"):
        parity = _parity(data, config, model, prob)

    th = Thresholds(config.epsilons[0], config.delta, config.epsilon_prime)
    sweeps = {}
    findings = []
    with timer.phase("sweep"):
        modes = [("general", None)]
        if config.exempt is not None:
            modes.append(("nonexempt", prob.column(config.exempt)))
        for mode, idx in modes:
            points = sweep_points(
                prob, config.epsilons, th, mode=mode, exempt_index=idx, seed=config.seed
            )
            sweeps[mode] = [p.row for p in points]
            for eps, p in zip(config.epsilons, points):
                findings.append(_finding_record(eps, p.exact, model))
                findings.append(_finding_record(eps, p.approx, model))

    summary = None
    if data is not None:
        summary = DatasetSummary(
            rows_read=data.rows_read if data.rows_read is not None else data.n_rows,
            rows_kept=data.n_rows,
            rows_dropped=data.rows_dropped,
            dropped=dict(data.dropped),
        )
    return AuditReport(
        protected=config.protected,
        delta=config.delta,
        epsilon_prime=config.epsilon_prime,
        seed=config.seed,
        exempt=config.exempt,
        dataset=summary,
        model=ModelSummary(
            inputs=list(model.inputs),
            coefficients=model.coefficients.tolist(),
            intercept=model.intercept,
            r_squared=r2,
            source="ols" if r2 is not None else "file",
        ),
        parity=parity,
        sweeps=sweeps,
        findings=findings,
        timings=timer.timings,
    )
