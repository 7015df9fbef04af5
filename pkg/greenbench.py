"""
greenbench command line

    python3 greenbench.py quantize weights.txt --bits 4 --out weights.q4.txt
    python3 greenbench.py bench --runner mock --dataset data.csv \\
        --power-source constant:28 --region test-grid --out run.json
    python3 greenbench.py compare before.json after.json --out comparison.json
    python3 greenbench.py report comparison.json

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from carbonledger import factor_source, load_factor_table, lookup_factor
from config import InferenceConfig, get_factor_file, get_region, resolve_inference_config
from corpus import load_csv, split
from energymeter import DEFAULT_INTERVAL_MS, parse_power_source
from errors import ConfigError, GreenBenchError, SampleTooLarge
from generate_api_client import DEFAULT_BASE_URL, GenerateAPIClient
from quantcore import DEFAULT_BITS, MAX_BITS, MIN_BITS, footprint_ratio, load_tensor, quant_error, quantize, save_quantized
from report import (
    comparison_document,
    emit_markdown_table,
    last_run,
    read_document,
    single_run_document,
    write_document,
)
from runner import HttpRunner, MockRunner, ToyRunner, compare, run_benchmark
from toy_classifier import DEFAULT_DIMS, toy_classifier_train

logger = logging.getLogger("greenbench")

DEFAULT_MODEL_BY_RUNNER = {"mock": "mock-oracle", "toy": "toy-classifier"}

# bench flag -> InferenceConfig field
INFERENCE_FLAGS = {
    "model": "model_name",
    "batch_size": "batch_size",
    "max_tokens": "max_tokens",
    "temperature": "temperature",
    "top_p": "top_p",
    "top_k": "top_k",
    "beam_size": "beam_size",
}
POSITIVE_INT_FLAGS = ("interval_ms", "max_range_uj", "dims", "subset")


class UsageErrorParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = UsageErrorParser(prog="greenbench", description="Quantize, benchmark and report the carbon cost of LLM inference.")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    q = commands.add_parser("quantize", help="Quantize a tensor file and print error stats")
    q.add_argument("tensor", help="Tensor file: shape line, then values line")
    q.add_argument("--bits", type=int, default=DEFAULT_BITS, help="Code width, 2-8 (default: 4)")
    q.add_argument("--out", help="Quantized output file (default: <tensor>.q<bits>.txt)")

    b = commands.add_parser("bench", help="Run a benchmark and write a report")
    b.add_argument("--dataset", required=True, help="CSV with text,label columns")
    b.add_argument("--runner", choices=["mock", "toy", "http"], default="mock")
    b.add_argument("--model", help="Model name sent to the server (overrides --config)")
    b.add_argument("--config", help="Preset file or bundled preset name, e.g. phi-3-mini")
    b.add_argument("--endpoint", default=DEFAULT_BASE_URL, help=f"Model server root or full generate URL (default: {DEFAULT_BASE_URL})")
    b.add_argument("--send-beam-size", action="store_true", help="Pass beam_size through to the server")
    b.add_argument("--mock-response", help="Fixed response text for the mock runner (default: echo the gold label)")
    b.add_argument("--power-source", required=True, help="counter:<path> | constant:<watts> | trace:<path>")
    b.add_argument("--max-range-uj", type=int, help="Counter wrap range when no companion max_energy_range_uj file exists")
    b.add_argument("--interval-ms", type=int, default=DEFAULT_INTERVAL_MS, help="Counter sampling interval")
    b.add_argument("--factor-file", help="Emission factor CSV (default: GREENBENCH_FACTOR_FILE or greenbench.conf)")
    b.add_argument("--region", help="Grid region key in the factor file")
    b.add_argument("--subset", type=int, help="Evaluate a seeded subsample of this size")
    b.add_argument("--seed", type=int, default=0, help="Subsample and toy training seed (default: 0)")
    b.add_argument("--bits", type=int, help="Toy runner: quantize weights to this width before inference")
    b.add_argument("--dims", type=int, default=DEFAULT_DIMS, help="Toy runner: hashed feature dimensions")
    b.add_argument("--batch-size", type=int)
    b.add_argument("--max-tokens", type=int)
    b.add_argument("--temperature", type=float)
    b.add_argument("--top-p", type=float)
    b.add_argument("--top-k", type=int)
    b.add_argument("--beam-size", type=int)
    b.add_argument("--parallel", action="store_true", help="Keep up to batch_size inferences in flight")
    b.add_argument("--predictions", help="Write per-example predictions to this CSV")
    b.add_argument("--out", help="Report JSON output (default: print the table only)")

    c = commands.add_parser("compare", help="Compare a before run with an after run")
    c.add_argument("before", help="Report JSON of the baseline run")
    c.add_argument("after", help="Report JSON of the optimized run")
    c.add_argument("--out", help="Write the comparison report JSON here")

    r = commands.add_parser("report", help="Render a report JSON as a markdown table")
    r.add_argument("document", help="Report JSON")
    r.add_argument("--out", help="Write markdown here instead of stdout")

    return parser


def cmd_quantize(args, parser) -> int:
    if not MIN_BITS <= args.bits <= MAX_BITS:
        parser.error(f"--bits must be between {MIN_BITS} and {MAX_BITS}, got {args.bits}")
    out = args.out or str(Path(args.tensor).with_suffix(f".q{args.bits}.txt"))

    print(f"🔢 Quantizing {args.tensor} to {args.bits} bits...")
    tensor = load_tensor(args.tensor)
    quantized = quantize(tensor, args.bits)
    stats = quant_error(tensor, args.bits)
    save_quantized(quantized, out)

    print(f"   ✅ Wrote {out}")
    print(f"   Shape: {' '.join(map(str, tensor.shape))}")
    print(f"   Delta: {stats.delta!r}")
    print(f"   Max abs error: {stats.max_abs_error!r}")
    print(f"   Mean squared error: {stats.mean_squared_error!r}")
    print(f"   Footprint ratio: {footprint_ratio(tensor, quantized):.4f}")
    return 0


def _build_runner(args, corpus, parser):
    if args.runner == "mock":
        if args.mock_response is not None:
            return MockRunner.constant(args.mock_response)
        return MockRunner.oracle()
    if args.runner == "toy":
        print(f"🧮 Training toy classifier ({args.dims} dims, seed {args.seed}) on {len(corpus)} example(s)...")
        weights = toy_classifier_train(corpus, dims=args.dims, seed=args.seed)
        if args.bits is not None:
            if not MIN_BITS <= args.bits <= MAX_BITS:
                parser.error(f"--bits must be between {MIN_BITS} and {MAX_BITS}, got {args.bits}")
            print(f"   Quantizing weights to {args.bits} bits")
            return ToyRunner(quantize(weights, args.bits))
        return ToyRunner(weights)
    client = GenerateAPIClient(args.endpoint, send_beam_size=args.send_beam_size)
    return HttpRunner(client)


def _write_predictions(run, path):
    df = pd.DataFrame(
        {
            "text": [p.text for p in run.predictions],
            "gold": [p.gold.value for p in run.predictions],
            "predicted": [p.predicted.value for p in run.predictions],
            "raw_response": [p.raw_response for p in run.predictions],
        },
        columns=["text", "gold", "predicted", "raw_response"],
    )
    df.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")


def _flag(dest: str) -> str:
    return "--" + dest.replace("_", "-")


def _inference_overrides(args, parser) -> dict:
    """InferenceConfig overrides from bench flags, checked one flag at a time."""
    overrides = {}
    for dest, field in INFERENCE_FLAGS.items():
        value = getattr(args, dest)
        if value is None:
            continue
        try:
            InferenceConfig(**{field: value})
        except ConfigError as e:
            parser.error(f"{_flag(dest)}: {e}")
        overrides[field] = value
    if "model_name" not in overrides and args.config is None and args.runner in DEFAULT_MODEL_BY_RUNNER:
        overrides["model_name"] = DEFAULT_MODEL_BY_RUNNER[args.runner]
    return overrides


def cmd_bench(args, parser) -> int:
    if args.bits is not None and args.runner != "toy":
        parser.error("--bits only applies to --runner toy")
    for dest in POSITIVE_INT_FLAGS:
        value = getattr(args, dest)
        if value is not None and value < 1:
            parser.error(f"{_flag(dest)} must be a positive integer, got {value}")

    config = resolve_inference_config(args.config, _inference_overrides(args, parser))

    try:
        provider = parse_power_source(args.power_source, max_range_uj=args.max_range_uj, interval_ms=args.interval_ms)
    except GreenBenchError:
        raise
    except ValueError as e:
        parser.error(f"--power-source: {e}")

    factor_path = get_factor_file(args.factor_file)
    region = get_region(args.region)
    table = load_factor_table(factor_path)
    factor = lookup_factor(table, region)
    source_path, source_line = factor_source(table, region)
    print(f"🌍 Emission factor: {factor.region} = {factor.gco2_per_kwh:g} gCO2/kWh ({source_path}:{source_line})")

    print(f"📋 Loading dataset {args.dataset}...")
    corpus = load_csv(args.dataset)
    print(f"   ✅ {len(corpus)} example(s), corpus id {corpus.corpus_id}")

    model = _build_runner(args, corpus, parser)
    evaluated = corpus
    if args.subset is not None:
        try:
            evaluated = split(corpus, args.subset, args.seed)
        except SampleTooLarge as e:
            parser.error(f"--subset: {e}")
        print(f"   Subsample: {len(evaluated)} example(s), seed {args.seed}")

    print(f"\n⚡ Benchmarking {config.model_name} ({model.name} runner, {provider.describe()})...")
    run = run_benchmark(model, evaluated, config, provider, factor, parallel=args.parallel)

    print(f"   ✅ {run.n_inferences} inference(s), {run.energy.joules:.3f} J, {run.carbon.kg_co2e:.6g} kg CO2e")
    print(f"   Per inference: {run.carbon.per_inference_kg:.6g} kg CO2e, {run.latency_ms_per_inference:.1f} ms")
    if run.unknown_count:
        print(f"   ⚠️  {run.unknown_count} unknown prediction(s), {run.generation_failures} generation failure(s)")
    if run.quantization is not None:
        print(f"   Quantized: {run.quantization.bits} bits, footprint ratio {run.quantization.footprint_ratio:.4f}")

    doc = single_run_document(run, source_path, source_line)
    if args.predictions:
        _write_predictions(run, args.predictions)
        print(f"   💾 Predictions written to {args.predictions}")
    if args.out:
        write_document(doc, args.out)
        print(f"   💾 Report written to {args.out}")

    print()
    print(emit_markdown_table(doc), end="")
    return 0


def cmd_compare(args, parser) -> int:
    before_doc = read_document(args.before)
    after_doc = read_document(args.after)
    comparison = compare(last_run(before_doc), last_run(after_doc))
    doc = comparison_document(before_doc, after_doc, comparison)

    if comparison.co2_reduction_pct is None:
        print("📊 CO2 reduction per inference: undefined (baseline emitted nothing)")
    else:
        print(f"📊 CO2 reduction per inference: {comparison.co2_reduction_pct:.1f}%")
    if args.out:
        write_document(doc, args.out)
        print(f"   💾 Comparison written to {args.out}")

    print()
    print(emit_markdown_table(doc), end="")
    return 0


def cmd_report(args, parser) -> int:
    markdown = emit_markdown_table(read_document(args.document))
    if args.out:
        Path(args.out).write_text(markdown, encoding="utf-8")
        print(f"💾 Markdown written to {args.out}")
    else:
        print(markdown, end="")
    return 0


COMMANDS = {
    "quantize": cmd_quantize,
    "bench": cmd_bench,
    "compare": cmd_compare,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args, parser)
    except SystemExit as e:
        return int(e.code or 0)
    except (GreenBenchError, OSError, UnicodeDecodeError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        logger.debug("Command failed", exc_info=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
