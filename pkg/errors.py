"""
Error hierarchy for greenbench

Every failure raised by the library derives from GreenBenchError. Input
validation errors also derive from ValueError, so callers catching
ValueError for bad parameters keep working.
"""

from typing import Iterable, Optional


class GreenBenchError(Exception):
    """Base class for all greenbench errors."""


class ConfigError(GreenBenchError, ValueError):
    """A configuration file or value could not be parsed."""


# Quantization

class EmptyTensor(GreenBenchError, ValueError):
    pass


class NonFiniteInput(GreenBenchError, ValueError):
    pass


class BitsOutOfRange(GreenBenchError, ValueError):
    pass


class MalformedTensor(GreenBenchError, ValueError):
    """Shape/value mismatch or out-of-range codes."""


# Energy

class EmptyTrace(GreenBenchError, ValueError):
    pass


class UnsortedTrace(GreenBenchError, ValueError):
    pass


class ZeroRange(GreenBenchError, ValueError):
    pass


class NegativePower(GreenBenchError, ValueError):
    pass


class CounterOutOfRange(GreenBenchError, ValueError):
    """A counter read outside [0, max_range_uj], or reads with different ranges."""


# Carbon

class UnknownRegion(GreenBenchError, KeyError):
    def __init__(self, region: str, available: Iterable[str]):
        self.region = region
        self.available = sorted(available)
        super().__init__(
            f"Unknown region '{region}'. Available regions: {', '.join(self.available)}"
        )

    def __str__(self) -> str:
        return self.args[0]


class InvalidFactor(GreenBenchError, ValueError):
    pass


class MalformedFactorFile(GreenBenchError, ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ZeroInferences(GreenBenchError, ValueError):
    pass


# Evaluation

class EmptyEvaluation(GreenBenchError, ValueError):
    pass


class UnknownGold(GreenBenchError, ValueError):
    pass


class EmptyMatrix(GreenBenchError, ValueError):
    pass


# Corpus

class MissingHeader(GreenBenchError, ValueError):
    pass


class BadLabel(GreenBenchError, ValueError):
    def __init__(self, label: str, row: int):
        self.label = label
        self.row = row
        super().__init__(f"row {row}: invalid label '{label}' (expected positive, negative or neutral)")


class EmptyText(GreenBenchError, ValueError):
    def __init__(self, row: Optional[int] = None):
        self.row = row
        if row is None:
            super().__init__("text must not be empty")
        else:
            super().__init__(f"row {row}: text is empty")


class SampleTooLarge(GreenBenchError, ValueError):
    pass


# Runner

class ShapeMismatch(GreenBenchError, ValueError):
    pass


class ModelUnreachable(GreenBenchError):
    def __init__(self, message: str, completed: int):
        self.completed = completed
        super().__init__(f"{message} (completed {completed} inference(s) before aborting)")


class ConnectionFailed(GreenBenchError):
    pass


class HttpError(GreenBenchError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        self.body = body
        detail = f" - {body[:200]}" if body else ""
        super().__init__(f"HTTP {status}{detail}")


class MalformedResponse(GreenBenchError):
    pass


class CorpusMismatch(GreenBenchError, ValueError):
    pass


class MalformedInputFile(GreenBenchError, ValueError):
    """A dataset, trace, counter or tensor file does not follow its documented format."""


class MalformedReport(GreenBenchError, ValueError):
    """A report document is missing keys or references runs it does not hold."""
