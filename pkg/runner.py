"""
Benchmark orchestration

Drives a model over a corpus while an energy provider measures the window,
then assembles metrics, energy, carbon and latency into a BenchmarkRun.
Two runs over the same corpus subset can be compared before/after.
"""

import logging
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Tuple, Union

from carbonledger import CarbonFootprint, EmissionFactor, footprint
from config import InferenceConfig
from corpus import Corpus, Example, build_prompt
from energymeter import EnergyProvider, EnergyReading
from errors import ConnectionFailed, CorpusMismatch, EmptyEvaluation, HttpError, MalformedResponse, ModelUnreachable
from evalmetrics import ConfusionMatrix, Label, MetricsReport, confusion, metrics, parse_label
from generate_api_client import GenerateAPIClient, Generation
from quantcore import QuantizedTensor, WeightTensor, memory_footprint
from toy_classifier import ToyClassifier

logger = logging.getLogger(__name__)

METRIC_NAMES = ("precision", "recall", "f1", "accuracy")


@dataclass(frozen=True)
class QuantizationInfo:
    bits: int
    footprint_ratio: float


@dataclass(frozen=True)
class PredictionRecord:
    text: str
    gold: Label
    predicted: Label
    raw_response: str


@dataclass(frozen=True)
class BenchmarkRun:
    """
    One row of a before/after comparison.

    `predictions` holds the per-example audit trail; it is not part of the
    run's identity or of the JSON report.
    """
    runner: str
    config: InferenceConfig
    corpus_id: str
    corpus_size: int
    subset_size: int
    subset_seed: Optional[int]
    n_inferences: int
    confusion: Tuple[Tuple[int, ...], ...]
    metrics: MetricsReport
    energy: EnergyReading
    energy_provider: str
    carbon: CarbonFootprint
    latency_ms_per_inference: float
    wall_clock_start: str
    wall_clock_end: str
    unknown_count: int
    generation_failures: int
    beam_size_honored: bool
    quantization: Optional[QuantizationInfo] = None
    total_eval_tokens: Optional[int] = None
    tokens_per_second: Optional[float] = None
    predictions: Tuple[PredictionRecord, ...] = field(default=(), compare=False, repr=False)

    @property
    def co2_per_inference_kg(self) -> float:
        return self.carbon.per_inference_kg


@dataclass(frozen=True)
class ComparisonReport:
    before: BenchmarkRun
    after: BenchmarkRun
    co2_reduction_pct: Optional[float]
    metric_deltas: Dict[str, float]


# Model runners

class ModelRunner:
    """A model that turns a prompt for one example into a response."""

    name = "abstract"

    def generate(self, config: InferenceConfig, prompt: str, example: Example) -> Generation:
        raise NotImplementedError

    def quantization(self) -> Optional[QuantizationInfo]:
        return None

    def beam_size_honored(self) -> bool:
        return False


class MockRunner(ModelRunner):
    """Answers with a fixed function of the example; no model involved."""

    name = "mock"

    def __init__(self, responder: Callable[[Example], str]):
        self.responder = responder

    @classmethod
    def oracle(cls) -> "MockRunner":
        """Always answers with the gold label."""
        return cls(lambda ex: f"{ex.label.value.capitalize()}: matches the reference label")

    @classmethod
    def constant(cls, text: str) -> "MockRunner":
        return cls(lambda ex: text)

    def generate(self, config: InferenceConfig, prompt: str, example: Example) -> Generation:
        return Generation(text=self.responder(example))


class ToyRunner(ModelRunner):
    """Hashed bag-of-words classifier; quantized weights go through dequantize."""

    name = "toy"

    def __init__(self, weights: Union[WeightTensor, QuantizedTensor]):
        self.classifier = ToyClassifier(weights)

    def generate(self, config: InferenceConfig, prompt: str, example: Example) -> Generation:
        return Generation(text=self.classifier.predict(example.text).value.capitalize())

    def quantization(self) -> Optional[QuantizationInfo]:
        weights = self.classifier.weights
        if not isinstance(weights, QuantizedTensor):
            return None
        return QuantizationInfo(bits=weights.bits, footprint_ratio=memory_footprint(weights) / (4 * weights.size))


class HttpRunner(ModelRunner):
    name = "http"

    def __init__(self, client: GenerateAPIClient):
        self.client = client

    def generate(self, config: InferenceConfig, prompt: str, example: Example) -> Generation:
        return self.client.generate(config, prompt)

    def beam_size_honored(self) -> bool:
        return self.client.send_beam_size


# Benchmark

def _iso_from_ms(epoch_ms: int) -> str:
    return datetime.fromtimestamp(epoch_ms / 1000, tz=timezone.utc).isoformat(timespec="milliseconds")


def _infer(model: ModelRunner, config: InferenceConfig, example: Example) -> Tuple[PredictionRecord, Optional[Generation], bool]:
    """One example. HTTP and format failures degrade to an unknown prediction."""
    prompt = build_prompt(example.text)
    try:
        generation = model.generate(config, prompt, example)
    except (HttpError, MalformedResponse) as e:
        logger.warning(f"Generation failed, recording unknown: {e}")
        return PredictionRecord(example.text, example.label, Label.UNKNOWN, ""), None, True
    predicted = parse_label(generation.text)
    return PredictionRecord(example.text, example.label, predicted, generation.text), generation, False


def _run_sequential(model, corpus, config):
    results = []
    for example in corpus:
        try:
            results.append(_infer(model, config, example))
        except ConnectionFailed as e:
            raise ModelUnreachable(str(e), completed=len(results)) from e
    return results


def _run_parallel(model, corpus, config):
    results: List = [None] * len(corpus)
    with ThreadPoolExecutor(max_workers=config.batch_size) as executor:
        futures = {executor.submit(_infer, model, config, ex): i for i, ex in enumerate(corpus)}
        done, pending = wait(futures, return_when=FIRST_EXCEPTION)
        failure = None
        for future in done:
            error = future.exception()
            if error is None:
                results[futures[future]] = future.result()
            elif failure is None:
                failure = error
        if failure is not None:
            for future in pending:
                future.cancel()
            completed = sum(1 for r in results if r is not None)
            if isinstance(failure, ConnectionFailed):
                raise ModelUnreachable(str(failure), completed=completed) from failure
            raise failure
    return results


def run_benchmark(
    model: ModelRunner,
    corpus: Corpus,
    config: InferenceConfig,
    energy_provider: EnergyProvider,
    factor: EmissionFactor,
    parallel: bool = False,
) -> BenchmarkRun:
    """
    Run every example through the model while energy is measured.

    The energy provider starts before the first inference and stops after
    the last. With `parallel`, up to `config.batch_size` inferences are in
    flight at once.

    Raises:
        EmptyEvaluation: If the corpus is empty
        ModelUnreachable: If the model server cannot be reached; carries the
            number of completed inferences
    """
    if len(corpus) == 0:
        raise EmptyEvaluation("corpus has no examples")

    logger.info(f"Benchmarking {config.model_name} ({model.name}) on {len(corpus)} example(s)")
    energy_provider.start()
    try:
        if parallel and config.batch_size > 1:
            results = _run_parallel(model, corpus, config)
        else:
            results = _run_sequential(model, corpus, config)
    finally:
        energy = energy_provider.stop()
    start_ms, end_ms = energy_provider.window()

    records = tuple(r[0] for r in results)
    generations = [r[1] for r in results if r[1] is not None]
    failures = sum(1 for r in results if r[2])
    n = len(records)

    cm: ConfusionMatrix = confusion((r.gold, r.predicted) for r in records)
    report: MetricsReport = metrics(cm)
    carbon = footprint(energy, factor, n_inferences=n)

    token_counts = [g.eval_count for g in generations if g.eval_count is not None]
    durations = [g.eval_duration_ns for g in generations if g.eval_duration_ns is not None]
    total_tokens = sum(token_counts) if token_counts else None
    tokens_per_second = None
    if total_tokens is not None and durations and sum(durations) > 0:
        tokens_per_second = total_tokens / (sum(durations) / 1e9)

    beam_honored = model.beam_size_honored()
    if not beam_honored:
        logger.debug(f"beam_size={config.beam_size} carried in config but not sent to the model")

    return BenchmarkRun(
        runner=model.name,
        config=config,
        corpus_id=corpus.corpus_id,
        corpus_size=corpus.source_size or len(corpus),
        subset_size=n,
        subset_seed=corpus.subset_seed,
        n_inferences=n,
        confusion=tuple(tuple(int(c) for c in row) for row in cm.counts),
        metrics=report,
        energy=energy,
        energy_provider=energy_provider.describe(),
        carbon=carbon,
        latency_ms_per_inference=(end_ms - start_ms) / n,
        wall_clock_start=_iso_from_ms(start_ms),
        wall_clock_end=_iso_from_ms(end_ms),
        unknown_count=cm.unknown_count,
        generation_failures=failures,
        beam_size_honored=beam_honored,
        quantization=model.quantization(),
        total_eval_tokens=total_tokens,
        tokens_per_second=tokens_per_second,
        predictions=records,
    )


def _macro(report: MetricsReport) -> Dict[str, float]:
    return {
        "precision": report.macro_precision,
        "recall": report.macro_recall,
        "f1": report.macro_f1,
        "accuracy": report.accuracy,
    }


def compare(before: BenchmarkRun, after: BenchmarkRun) -> ComparisonReport:
    """
    Before/after comparison on per-inference CO2 and macro metrics.

    Reductions are not clamped: a negative percentage is a regression.
    Two runs that both emitted nothing reduce by 0%; co2_reduction_pct is
    None when only the before run emitted nothing.

    Raises:
        CorpusMismatch: Unless corpus id, subset size and seed all match
    """
    before_subset = (before.corpus_id, before.subset_size, before.subset_seed)
    after_subset = (after.corpus_id, after.subset_size, after.subset_seed)
    if before_subset != after_subset:
        raise CorpusMismatch(
            f"runs cover different corpus subsets: before={before_subset}, after={after_subset}"
        )

    before_co2 = before.carbon.per_inference_kg
    after_co2 = after.carbon.per_inference_kg
    if before_co2:
        reduction: Optional[float] = 100.0 * (before_co2 - after_co2) / before_co2
    else:
        reduction = 0.0 if not after_co2 else None

    before_metrics, after_metrics = _macro(before.metrics), _macro(after.metrics)
    deltas = {name: after_metrics[name] - before_metrics[name] for name in METRIC_NAMES}
    return ComparisonReport(before=before, after=after, co2_reduction_pct=reduction, metric_deltas=deltas)
