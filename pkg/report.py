"""
Report documents

A ReportDocument bundles benchmark runs, before/after comparisons and the
provenance needed to tell whether two reports were measured the same way.

JSON layout (top-level keys are fixed):

    {
      "comparisons": [{"after": <run_id>, "before": <run_id>, ...}],
      "provenance": {"energy_providers": [...], "factor_sources": [...], ...},
      "runs": [{"run_id": "...", "config": {...}, "metrics": {...}, ...}],
      "schema_version": "1.0"
    }

Runs are referenced from comparisons by `run_id`, a digest of the run's own
serialized content. Numbers are written at full precision; rounding only
happens in the markdown table.
"""

import hashlib
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from carbonledger import CarbonFootprint, EmissionFactor
from config import InferenceConfig
from energymeter import EnergyReading, Provider
from errors import MalformedReport
from evalmetrics import ClassMetrics, MetricsReport
from runner import BenchmarkRun, ComparisonReport, QuantizationInfo

SCHEMA_VERSION = "1.0"
TOOL_VERSION = "greenbench 0.1.0"

TABLE_HEADER = "| Model | Precision | Recall | F1 | Accuracy | CO₂ (kg) |"
TABLE_SEPARATOR = "|---|---|---|---|---|---|"

_METRIC_PLACES = Decimal("0.01")
_CO2_PLACES = Decimal("0.001")


@dataclass(frozen=True)
class FactorSource:
    """Where an emission factor came from: file path and 1-based line."""
    path: str
    line: int
    region: str


@dataclass(frozen=True)
class Provenance:
    tool_version: str = TOOL_VERSION
    energy_providers: Tuple[str, ...] = ()
    factor_sources: Tuple[FactorSource, ...] = ()
    subsets: Tuple[str, ...] = ()

    def merge(self, other: "Provenance") -> "Provenance":
        """Union of both provenances, first-seen order kept."""
        return Provenance(
            tool_version=self.tool_version,
            energy_providers=_unique(self.energy_providers + other.energy_providers),
            factor_sources=_unique(self.factor_sources + other.factor_sources),
            subsets=_unique(self.subsets + other.subsets),
        )


@dataclass(frozen=True)
class ReportDocument:
    """
    Runs, comparisons between them, and provenance.

    Raises:
        MalformedReport: If a comparison references a run not in `runs`, or
            a document with runs lacks provider, factor or subset provenance
    """
    schema_version: str
    runs: Tuple[BenchmarkRun, ...]
    comparisons: Tuple[ComparisonReport, ...]
    provenance: Provenance

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        object.__setattr__(self, "comparisons", tuple(self.comparisons))
        if not self.schema_version:
            raise MalformedReport("schema_version must not be empty")
        if not self.provenance.tool_version:
            raise MalformedReport("provenance.tool_version must not be empty")
        if self.runs:
            p = self.provenance
            if not (p.energy_providers and p.factor_sources and p.subsets):
                raise MalformedReport("a report with runs must name its energy providers, factor sources and subsets")
        for comparison in self.comparisons:
            for side in (comparison.before, comparison.after):
                if side not in self.runs:
                    raise MalformedReport("comparison references a run that is not in the document")


def _unique(items: Iterable) -> tuple:
    seen: List = []
    for item in items:
        if item not in seen:
            seen.append(item)
    return tuple(seen)


def subset_descriptor(run: BenchmarkRun) -> str:
    """e.g. `3f2a...:50/300@seed=7`, or `3f2a...:300/300` for a full corpus."""
    descriptor = f"{run.corpus_id}:{run.subset_size}/{run.corpus_size}"
    if run.subset_seed is not None:
        descriptor += f"@seed={run.subset_seed}"
    return descriptor


def provenance_for_run(run: BenchmarkRun, factor_path: str, factor_line: int) -> Provenance:
    return Provenance(
        energy_providers=(run.energy_provider,),
        factor_sources=(FactorSource(str(factor_path), int(factor_line), run.carbon.factor.region),),
        subsets=(subset_descriptor(run),),
    )


def single_run_document(run: BenchmarkRun, factor_path: str, factor_line: int) -> ReportDocument:
    return ReportDocument(
        schema_version=SCHEMA_VERSION,
        runs=(run,),
        comparisons=(),
        provenance=provenance_for_run(run, factor_path, factor_line),
    )


def comparison_document(before_doc: ReportDocument, after_doc: ReportDocument, comparison: ComparisonReport) -> ReportDocument:
    """A document holding both sides of a comparison, provenance merged."""
    return ReportDocument(
        schema_version=SCHEMA_VERSION,
        runs=_unique((comparison.before, comparison.after)),
        comparisons=(comparison,),
        provenance=before_doc.provenance.merge(after_doc.provenance),
    )


def last_run(doc: ReportDocument) -> BenchmarkRun:
    if not doc.runs:
        raise MalformedReport("report holds no runs")
    return doc.runs[-1]


# JSON

def _canonical(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)


def _run_body(run: BenchmarkRun) -> Dict[str, Any]:
    m = run.metrics
    q = run.quantization
    return {
        "runner": run.runner,
        "config": run.config.to_dict(),
        "corpus": {
            "corpus_id": run.corpus_id,
            "corpus_size": int(run.corpus_size),
            "subset_size": int(run.subset_size),
            "subset_seed": run.subset_seed,
        },
        "n_inferences": int(run.n_inferences),
        "confusion": [[int(c) for c in row] for row in run.confusion],
        "metrics": {
            "per_class": {
                label: {"precision": float(c.precision), "recall": float(c.recall), "f1": float(c.f1)}
                for label, c in m.per_class.items()
            },
            "macro_precision": float(m.macro_precision),
            "macro_recall": float(m.macro_recall),
            "macro_f1": float(m.macro_f1),
            "accuracy": float(m.accuracy),
        },
        "energy": {
            "joules": float(run.energy.joules),
            "kwh": float(run.energy.kwh),
            "provider": run.energy.provider.value,
            "window_ms": int(run.energy.window_ms),
        },
        "energy_provider": run.energy_provider,
        "carbon": {
            "kg_co2e": float(run.carbon.kg_co2e),
            "energy_kwh": float(run.carbon.energy_kwh),
            "per_inference_kg": None if run.carbon.per_inference_kg is None else float(run.carbon.per_inference_kg),
            "factor": {
                "region": run.carbon.factor.region,
                "gco2_per_kwh": float(run.carbon.factor.gco2_per_kwh),
                "scope": run.carbon.factor.scope.value,
            },
        },
        "latency_ms_per_inference": float(run.latency_ms_per_inference),
        "wall_clock": {"start": run.wall_clock_start, "end": run.wall_clock_end},
        "unknown_count": int(run.unknown_count),
        "generation_failures": int(run.generation_failures),
        "beam_size_honored": bool(run.beam_size_honored),
        "quantization": None if q is None else {"bits": int(q.bits), "footprint_ratio": float(q.footprint_ratio)},
        "total_eval_tokens": run.total_eval_tokens,
        "tokens_per_second": None if run.tokens_per_second is None else float(run.tokens_per_second),
    }


def run_id(run: BenchmarkRun) -> str:
    """Content digest of a run; identical runs share an id."""
    return hashlib.sha256(_canonical(_run_body(run)).encode("utf-8")).hexdigest()[:16]


def run_to_dict(run: BenchmarkRun) -> Dict[str, Any]:
    body = _run_body(run)
    body["run_id"] = run_id(run)
    return body


def run_from_dict(data: Dict[str, Any]) -> BenchmarkRun:
    """
    Rebuild a BenchmarkRun from its JSON form.

    Raises:
        MalformedReport: On missing keys or invalid values
    """
    try:
        corpus, metrics, energy, carbon = data["corpus"], data["metrics"], data["energy"], data["carbon"]
        q = data.get("quantization")
        return BenchmarkRun(
            runner=data["runner"],
            config=InferenceConfig(**data["config"]),
            corpus_id=corpus["corpus_id"],
            corpus_size=corpus["corpus_size"],
            subset_size=corpus["subset_size"],
            subset_seed=corpus["subset_seed"],
            n_inferences=data["n_inferences"],
            confusion=tuple(tuple(row) for row in data["confusion"]),
            metrics=MetricsReport(
                per_class={label: ClassMetrics(**values) for label, values in metrics["per_class"].items()},
                macro_precision=metrics["macro_precision"],
                macro_recall=metrics["macro_recall"],
                macro_f1=metrics["macro_f1"],
                accuracy=metrics["accuracy"],
            ),
            energy=EnergyReading(
                joules=energy["joules"],
                kwh=energy["kwh"],
                provider=Provider(energy["provider"]),
                window_ms=energy["window_ms"],
            ),
            energy_provider=data["energy_provider"],
            carbon=CarbonFootprint(
                kg_co2e=carbon["kg_co2e"],
                energy_kwh=carbon["energy_kwh"],
                factor=EmissionFactor(**carbon["factor"]),
                per_inference_kg=carbon["per_inference_kg"],
            ),
            latency_ms_per_inference=data["latency_ms_per_inference"],
            wall_clock_start=data["wall_clock"]["start"],
            wall_clock_end=data["wall_clock"]["end"],
            unknown_count=data["unknown_count"],
            generation_failures=data["generation_failures"],
            beam_size_honored=data["beam_size_honored"],
            quantization=None if q is None else QuantizationInfo(bits=q["bits"], footprint_ratio=q["footprint_ratio"]),
            total_eval_tokens=data.get("total_eval_tokens"),
            tokens_per_second=data.get("tokens_per_second"),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, MalformedReport):
            raise
        raise MalformedReport(f"invalid run entry: {e!r}") from e


def _provenance_to_dict(p: Provenance) -> Dict[str, Any]:
    return {
        "tool_version": p.tool_version,
        "energy_providers": list(p.energy_providers),
        "factor_sources": [{"path": s.path, "line": s.line, "region": s.region} for s in p.factor_sources],
        "subsets": list(p.subsets),
    }


def _provenance_from_dict(data: Dict[str, Any]) -> Provenance:
    try:
        return Provenance(
            tool_version=data["tool_version"],
            energy_providers=tuple(data["energy_providers"]),
            factor_sources=tuple(FactorSource(**s) for s in data["factor_sources"]),
            subsets=tuple(data["subsets"]),
        )
    except (KeyError, TypeError) as e:
        raise MalformedReport(f"invalid provenance: {e!r}") from e


def document_to_dict(doc: ReportDocument) -> Dict[str, Any]:
    return {
        "schema_version": doc.schema_version,
        "runs": [run_to_dict(run) for run in doc.runs],
        "comparisons": [
            {
                "before": run_id(c.before),
                "after": run_id(c.after),
                "co2_reduction_pct": c.co2_reduction_pct,
                "metric_deltas": dict(c.metric_deltas),
            }
            for c in doc.comparisons
        ],
        "provenance": _provenance_to_dict(doc.provenance),
    }


def emit_json(doc: ReportDocument) -> bytes:
    """
    Canonical JSON: sorted keys, two-space indent, full float precision,
    UTF-8, newline-terminated. Equal documents give identical bytes.
    """
    return (_canonical(document_to_dict(doc)) + "\n").encode("utf-8")


def parse_document(raw) -> ReportDocument:
    """
    Parse `emit_json` output back into a ReportDocument.

    Raises:
        MalformedReport: On invalid JSON, an unsupported schema version,
            missing keys or dangling run references
    """
    try:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        data = json.loads(raw)
    except ValueError as e:
        raise MalformedReport(f"report is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise MalformedReport("report must be a JSON object")

    missing = [key for key in ("schema_version", "runs", "comparisons", "provenance") if key not in data]
    if missing:
        raise MalformedReport(f"report is missing key(s): {', '.join(missing)}")
    if not isinstance(data["runs"], list) or not isinstance(data["comparisons"], list):
        raise MalformedReport("runs and comparisons must be JSON arrays")
    version = str(data["schema_version"])
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise MalformedReport(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")

    runs_by_id: Dict[str, BenchmarkRun] = {}
    runs: List[BenchmarkRun] = []
    for entry in data["runs"]:
        run = run_from_dict(entry)
        runs.append(run)
        runs_by_id[entry.get("run_id") or run_id(run)] = run

    comparisons = []
    for entry in data["comparisons"]:
        try:
            before, after = runs_by_id[entry["before"]], runs_by_id[entry["after"]]
            comparisons.append(ComparisonReport(
                before=before,
                after=after,
                co2_reduction_pct=entry["co2_reduction_pct"],
                metric_deltas=dict(entry["metric_deltas"]),
            ))
        except (KeyError, TypeError) as e:
            raise MalformedReport(f"comparison references an unknown run or lacks fields: {e!r}") from e

    return ReportDocument(
        schema_version=version,
        runs=tuple(runs),
        comparisons=tuple(comparisons),
        provenance=_provenance_from_dict(data["provenance"]),
    )


def write_document(doc: ReportDocument, path):
    Path(path).write_bytes(emit_json(doc))


def read_document(path) -> ReportDocument:
    return parse_document(Path(path).read_bytes())


# Markdown

def format_fixed(value: Optional[float], places: Decimal) -> str:
    """Half-even rounding on the shortest decimal form of `value`."""
    if value is None:
        return "n/a"
    return str(Decimal(repr(float(value))).quantize(places, rounding=ROUND_HALF_EVEN))


def table_row(run: BenchmarkRun) -> str:
    m = run.metrics
    cells = [
        run.config.model_name,
        format_fixed(m.macro_precision, _METRIC_PLACES),
        format_fixed(m.macro_recall, _METRIC_PLACES),
        format_fixed(m.macro_f1, _METRIC_PLACES),
        format_fixed(m.accuracy, _METRIC_PLACES),
        format_fixed(run.carbon.per_inference_kg, _CO2_PLACES),
    ]
    return "| " + " | ".join(cells) + " |"


def _table(runs: Sequence[BenchmarkRun]) -> List[str]:
    return [TABLE_HEADER, TABLE_SEPARATOR] + [table_row(run) for run in runs]


def _summary_line(c: ComparisonReport) -> str:
    name = c.after.config.model_name
    before = format_fixed(c.before.carbon.per_inference_kg, _CO2_PLACES)
    after = format_fixed(c.after.carbon.per_inference_kg, _CO2_PLACES)
    if c.co2_reduction_pct is None:
        reduction = "reduction undefined, before run emitted nothing"
    else:
        reduction = f"{format_fixed(c.co2_reduction_pct, Decimal('0.1'))}% reduction"
    delta = Decimal(repr(float(c.metric_deltas["f1"]))).quantize(_METRIC_PLACES, rounding=ROUND_HALF_EVEN)
    sign = "+" if delta >= 0 else ""
    return f"- {name}: CO₂ per inference {before} -> {after} kg ({reduction}), macro-F1 {sign}{delta}"


def emit_markdown_table(doc: ReportDocument) -> str:
    """
    Render runs as a markdown table: Model, Precision, Recall, F1,
    Accuracy and per-inference CO₂ in kg.

    Metrics use 2 decimals and CO₂ 3, rounded half-even. With comparisons the
    table splits into Before and After Optimization sections followed by one
    reduction line per comparison. An empty document renders the header only.

    Example:
        | Model | Precision | Recall | F1 | Accuracy | CO₂ (kg) |
        |---|---|---|---|---|---|
        | Phi 3.2 | 1.00 | 0.84 | 0.91 | 0.84 | 0.007 |
    """
    if not doc.comparisons:
        return "\n".join(_table(doc.runs)) + "\n"

    befores = _unique(c.before for c in doc.comparisons)
    afters = _unique(c.after for c in doc.comparisons)
    lines = ["### Before Optimization", ""] + _table(befores)
    lines += ["", "### After Optimization", ""] + _table(afters)

    others = [run for run in doc.runs if run not in befores and run not in afters]
    if others:
        lines += ["", "### Other Runs", ""] + _table(others)

    lines += ["", "### CO₂ Reduction per Inference", ""]
    lines += [_summary_line(c) for c in doc.comparisons]
    return "\n".join(lines) + "\n"
