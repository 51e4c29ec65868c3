"""Audit report types and their JSON, CSV and markdown encodings."""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from dataclasses import asdict, dataclass, field
from typing import Any

from .search import SweepRow, Verdict

SCHEMA_VERSION = "1.0"
FORMATS = ("json", "csv", "markdown")
CSV_COLUMNS = ("epsilon", "exact_influence", "approx_estimate", "approx_actual_influence")


@dataclass
class DatasetSummary:
    rows_read: int
    rows_kept: int
    rows_dropped: int
    dropped: dict[str, int] = field(default_factory=dict)


@dataclass
class ModelSummary:
    inputs: list[str]
    coefficients: list[float]
    intercept: float
    r_squared: float | None
    source: str


@dataclass
class ParitySummary:
    """Demographic parity quantities.

    ``parity_gap`` and ``identity_residual`` need row-level binary Z and are
    None otherwise.
    """

    association_prediction: float | None
    association_target: float | None = None
    parity_gap: float | None = None
    identity_residual: float | None = None


@dataclass
class WitnessTerm:
    feature: str
    alpha: float
    coefficient: float


@dataclass
class FindingRecord:
    epsilon: float
    mode: str
    method: str
    verdict: str
    side: int | None = None
    search_epsilon: float | None = None
    association: float | None = None
    influence: float | None = None
    approx_estimate: float | None = None
    witness: list[WitnessTerm] = field(default_factory=list)


@dataclass
class AuditReport:
    protected: str
    delta: float
    epsilon_prime: float
    seed: int
    exempt: str | None
    dataset: DatasetSummary | None
    model: ModelSummary
    parity: ParitySummary | None
    sweeps: dict[str, list[SweepRow]]
    findings: list[FindingRecord]
    timings: dict[str, float] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @property
    def flagged(self) -> bool:
        """True if any finding is not no-proxy-use."""
        return any(f.verdict != Verdict.NONE.value for f in self.findings)

    def to_dict(self, timings: bool = True) -> dict[str, Any]:
        out = asdict(self)
        if not timings:
            out.pop("timings")
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AuditReport:
        data = dict(data)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema_version')!r}")
        findings = []
        for f in data.pop("findings"):
            f = dict(f)
            f["witness"] = [WitnessTerm(**w) for w in f["witness"]]
            findings.append(FindingRecord(**f))
        dataset = data.pop("dataset")
        parity = data.pop("parity")
        return cls(
            dataset=DatasetSummary(**dataset) if dataset is not None else None,
            model=ModelSummary(**data.pop("model")),
            parity=ParitySummary(**parity) if parity is not None else None,
            sweeps={k: [SweepRow(**r) for r in rows] for k, rows in data.pop("sweeps").items()},
            findings=findings,
            timings=data.pop("timings", {}),
            **data,
        )


def _csv_table(rows: list[SweepRow]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([repr(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue().encode("utf-8")


def _fmt(x: float | None, digits: int = 4) -> str:
    return "n/a" if x is None else f"{x:.{digits}f}"


def _markdown(report: AuditReport) -> bytes:
    lines = [f"# Proxy audit: protected attribute `{report.protected}`", ""]
    if report.model.r_squared is not None:
        lines.append(f"Surrogate model R^2: {report.model.r_squared:.4f}")
    if report.parity is not None:
        p = report.parity
        lines.append(f"Asc(Y_hat, Z): {_fmt(p.association_prediction)}")
        if p.association_target is not None:
            lines.append(f"Asc(Y, Z): {_fmt(p.association_target)}")
        if p.parity_gap is not None:
            lines.append(f"E[Y_hat | Z=0] - E[Y_hat | Z=1]: {p.parity_gap:.6g}")
    titles = {"general": "All components", "nonexempt": f"Nonexempt components (exempt: `{report.exempt}`)"}
    for name, rows in report.sweeps.items():
        lines += ["", f"## {titles.get(name, name)}", ""]
        header = ["Association threshold ε"] + [f"{r.epsilon:g}" for r in rows]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for label, attr in (
            ("Actual infl. (exact)", "exact_influence"),
            ("Approx. infl. (approx)", "approx_estimate"),
            ("Actual infl. (approx)", "approx_actual_influence"),
        ):
            lines.append("| " + " | ".join([label] + [_fmt(getattr(r, attr)) for r in rows]) + " |")
    if report.findings:
        lines += ["", f"## Findings at δ = {report.delta:g}", ""]
        lines.append("| ε | mode | method | verdict | association | influence |")
        lines.append("|---|---|---|---|---|---|")
        for f in report.findings:
            lines.append(
                f"| {f.epsilon:g} | {f.mode} | {f.method} | {f.verdict} "
                f"| {_fmt(f.association)} | {_fmt(f.influence)} |"
            )
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_report(
    report: AuditReport, fmt: str = "json", *, timings: bool = False, table: str = "general"
) -> bytes:
    """Encode ``report``.

    JSON omits wall-clock timings unless ``timings`` is set, so identical
    inputs give byte-identical output. CSV emits the single sweep ``table``.
    """
    if fmt == "json":
        text = json.dumps(
            report.to_dict(timings), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False
        )
        return (text + "\n").encode("utf-8")
    if fmt == "csv":
        return _csv_table(report.sweeps.get(table, []))
    if fmt == "markdown":
        return _markdown(report)
    raise ValueError(f"unknown report format {fmt!r}; choose from {', '.join(FORMATS)}")


def parse_report(blob: bytes | str) -> AuditReport:
    if isinstance(blob, bytes):
        blob = blob.decode("utf-8")
    return AuditReport.from_dict(json.loads(blob))


def load_schema() -> dict[str, Any]:
    """The JSON schema every emitted report validates against."""
    return json.loads(resources.files(__package__).joinpath("report.schema.json").read_text("utf-8"))

