"""
Energy measurement for benchmark windows

Three providers produce the total energy E of a benchmark window:

- counter-file: a cumulative microjoule counter (RAPL `energy_uj` style),
  re-read on every sampling tick so at most one wraparound happens per read
- constant-power: a configured wattage times the measured duration
- trace-replay: a recorded `timestamp_ms,watts` CSV integrated with the
  trapezoidal rule

Integration helpers are pure; providers own a start/stop lifecycle.
"""

import enum
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import CounterOutOfRange, EmptyTrace, MalformedInputFile, NegativePower, UnsortedTrace, ZeroRange

logger = logging.getLogger(__name__)

JOULES_PER_KWH = 3.6e6
DEFAULT_INTERVAL_MS = 100
TRACE_COLUMNS = ["timestamp_ms", "watts"]


def _is_valid_watts(watts: float) -> bool:
    return math.isfinite(watts) and watts >= 0


class Provider(str, enum.Enum):
    COUNTER_FILE = "counter-file"
    CONSTANT_POWER = "constant-power"
    TRACE_REPLAY = "trace-replay"


@dataclass(frozen=True)
class PowerSample:
    timestamp_ms: int
    watts: float

    def __post_init__(self):
        if not _is_valid_watts(self.watts):
            raise NegativePower(f"power sample at t={self.timestamp_ms} ms must be finite and non-negative, got {self.watts} W")


@dataclass(frozen=True)
class EnergyReading:
    joules: float
    kwh: float
    provider: Provider
    window_ms: int

    @classmethod
    def from_joules(cls, joules: float, provider: Provider, window_ms: int) -> "EnergyReading":
        joules = float(joules)
        return cls(joules=joules, kwh=joules / JOULES_PER_KWH, provider=Provider(provider), window_ms=int(window_ms))


@dataclass(frozen=True)
class CounterRead:
    microjoules: int
    max_range_uj: int

    def __post_init__(self):
        if self.microjoules < 0 or self.microjoules > self.max_range_uj:
            raise CounterOutOfRange(
                f"counter value {self.microjoules} outside [0, {self.max_range_uj}]"
            )


def integrate_trace(samples: Sequence[PowerSample]) -> EnergyReading:
    """
    Integrate a power trace with the trapezoidal rule.

    Args:
        samples: Power samples ordered by timestamp

    Returns:
        EnergyReading (provider trace-replay); a single sample yields 0 J

    Raises:
        EmptyTrace: If samples is empty
        UnsortedTrace: If a timestamp decreases

    Example:
        >>> integrate_trace([PowerSample(0, 0.0), PowerSample(2000, 10.0)]).joules
        10.0
    """
    if not samples:
        raise EmptyTrace("power trace has no samples")
    t_ms = np.array([s.timestamp_ms for s in samples], dtype=np.float64)
    watts = np.array([s.watts for s in samples], dtype=np.float64)
    if np.any(np.diff(t_ms) < 0):
        bad = int(np.argmax(np.diff(t_ms) < 0)) + 1
        raise UnsortedTrace(f"timestamp decreases at sample {bad} ({int(t_ms[bad - 1])} -> {int(t_ms[bad])} ms)")
    window_ms = int(t_ms[-1] - t_ms[0])
    if len(samples) == 1:
        return EnergyReading.from_joules(0.0, Provider.TRACE_REPLAY, 0)
    # watt-milliseconds to joules
    joules = float(np.trapezoid(watts, t_ms)) / 1000.0
    return EnergyReading.from_joules(joules, Provider.TRACE_REPLAY, window_ms)


def counter_delta(before: CounterRead, after: CounterRead) -> float:
    """
    Joules elapsed between two counter reads, allowing one wraparound.

    Example:
        >>> counter_delta(CounterRead(1_000_000, 10**9), CounterRead(4_600_000, 10**9))
        3.6
    """
    max_range = after.max_range_uj
    if max_range == 0 or before.max_range_uj == 0:
        raise ZeroRange("counter max_range_uj must be positive")
    if before.max_range_uj != max_range:
        raise CounterOutOfRange(f"counter reads disagree on max_range_uj ({before.max_range_uj} vs {max_range})")
    delta_uj = (after.microjoules - before.microjoules) % (max_range + 1)
    return delta_uj / 1e6


def constant_power_energy(watts: float, duration_ms: int) -> EnergyReading:
    """
    Energy of a constant draw: watts * duration.

    Raises:
        NegativePower: If watts is negative or not finite, or duration is negative
    """
    if not _is_valid_watts(watts):
        raise NegativePower(f"constant power must be finite and non-negative, got {watts} W")
    if duration_ms < 0:
        raise NegativePower(f"duration must be non-negative, got {duration_ms} ms")
    return EnergyReading.from_joules(watts * duration_ms / 1000.0, Provider.CONSTANT_POWER, duration_ms)


# Trace files

def load_trace(path) -> List[PowerSample]:
    """
    Read a `timestamp_ms,watts` CSV into power samples.

    Raises:
        EmptyTrace: If the file is empty
        MalformedInputFile: If the CSV cannot be tokenized, a column is
            missing or a cell is not a finite number (1-based data rows)
        NegativePower: If a watts value is negative
    """
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError as e:
        raise EmptyTrace(f"{path}: trace file is empty") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise MalformedInputFile(f"{path}: not a readable timestamp_ms,watts CSV ({e})") from e
    missing = [c for c in TRACE_COLUMNS if c not in df.columns]
    if missing:
        raise MalformedInputFile(f"{path}: missing column(s) {', '.join(missing)} (header must be timestamp_ms,watts)")
    timestamps = pd.to_numeric(df["timestamp_ms"], errors="coerce")
    watts = pd.to_numeric(df["watts"], errors="coerce")
    bad = np.flatnonzero(~(np.isfinite(timestamps.to_numpy(dtype=float)) & watts.notna().to_numpy()))
    if len(bad):
        raise MalformedInputFile(f"{path}: row {int(bad[0]) + 1}: timestamp_ms and watts must both be numbers")
    return [PowerSample(int(t), float(w)) for t, w in zip(timestamps, watts)]


def save_trace(samples: Sequence[PowerSample], path):
    df = pd.DataFrame(
        {"timestamp_ms": [s.timestamp_ms for s in samples], "watts": [s.watts for s in samples]},
        columns=TRACE_COLUMNS,
    )
    df.to_csv(path, index=False, lineterminator="\n")


# Counter files

def read_counter(path) -> int:
    """Read a cumulative microjoule counter file (ASCII decimal integer)."""
    with open(path, "rb") as f:
        text = f.read().decode("ascii", errors="replace").strip()
    try:
        return int(text)
    except ValueError as e:
        raise MalformedInputFile(f"{path}: counter file must hold a decimal integer, got {text[:40]!r}") from e


def companion_max_range(counter_path) -> Optional[int]:
    """max_energy_range_uj next to the counter file, as the powercap layout provides."""
    companion = Path(counter_path).with_name("max_energy_range_uj")
    if companion.exists():
        return read_counter(companion)
    return None


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


# Providers

class EnergyProvider:
    """
    Start/stop lifecycle shared by all providers.

    `window()` returns the (start, end) epoch milliseconds of the measured
    window once stopped.
    """

    name: Provider

    def start(self):
        raise NotImplementedError

    def stop(self) -> EnergyReading:
        raise NotImplementedError

    def window(self) -> Tuple[int, int]:
        raise NotImplementedError

    def describe(self) -> str:
        return self.name.value


class ConstantPowerProvider(EnergyProvider):
    name = Provider.CONSTANT_POWER

    def __init__(self, watts: float, clock: Callable[[], int] = _now_ms):
        if not _is_valid_watts(watts):
            raise NegativePower(f"constant power must be finite and non-negative, got {watts} W")
        self.watts = float(watts)
        self._clock = clock
        self._start_ms: Optional[int] = None
        self._end_ms: Optional[int] = None

    def start(self):
        self._start_ms = self._clock()
        self._end_ms = None
        logger.info(f"Constant-power collector started at {self.watts} W")

    def stop(self) -> EnergyReading:
        if self._start_ms is None:
            raise RuntimeError("collector was never started")
        self._end_ms = self._clock()
        reading = constant_power_energy(self.watts, self._end_ms - self._start_ms)
        logger.info(f"Constant-power collector stopped: {reading.joules:.3f} J over {reading.window_ms} ms")
        return reading

    def window(self) -> Tuple[int, int]:
        return self._start_ms, self._end_ms

    def describe(self) -> str:
        return f"{self.name.value}:{self.watts!r}W"


class TraceReplayProvider(EnergyProvider):
    """Replays a recorded trace; the window is the trace's own time span."""

    name = Provider.TRACE_REPLAY

    def __init__(self, path):
        self.path = str(path)
        self.samples = load_trace(path)

    def start(self):
        logger.info(f"Replaying power trace {self.path} ({len(self.samples)} samples)")

    def stop(self) -> EnergyReading:
        return integrate_trace(self.samples)

    def window(self) -> Tuple[int, int]:
        if not self.samples:
            raise EmptyTrace(f"{self.path}: trace is empty")
        return self.samples[0].timestamp_ms, self.samples[-1].timestamp_ms

    def describe(self) -> str:
        return f"{self.name.value}:{self.path}"


@dataclass
class _CounterState:
    last: Optional[CounterRead] = None
    last_ms: Optional[int] = None
    joules: float = 0.0
    samples: List[PowerSample] = field(default_factory=list)


class CounterFileProvider(EnergyProvider):
    """
    Samples a cumulative energy counter file every `interval_ms` in a
    background thread and sums per-tick deltas.
    """

    name = Provider.COUNTER_FILE

    def __init__(
        self,
        path,
        max_range_uj: Optional[int] = None,
        interval_ms: int = DEFAULT_INTERVAL_MS,
        clock: Callable[[], int] = _now_ms,
    ):
        self.path = str(path)
        if max_range_uj is None:
            max_range_uj = companion_max_range(path)
        if not max_range_uj:
            raise ZeroRange(
                f"{path}: max_range_uj must be configured (flag or max_energy_range_uj companion file)"
            )
        self.max_range_uj = int(max_range_uj)
        self.interval_ms = interval_ms
        self._clock = clock
        self._state = _CounterState()
        self._lock = threading.Lock()
        self._stop_event = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._start_ms: Optional[int] = None
        self._end_ms: Optional[int] = None

    def _tick(self):
        now = self._clock()
        read = CounterRead(read_counter(self.path), self.max_range_uj)
        with self._lock:
            state = self._state
            if state.last is not None:
                joules = counter_delta(state.last, read)
                elapsed_ms = now - state.last_ms
                state.joules += joules
                watts = joules / (elapsed_ms / 1000.0) if elapsed_ms > 0 else 0.0
                state.samples.append(PowerSample(now, watts))
            state.last = read
            state.last_ms = now

    def _loop(self):
        while not self._stop_event.wait(self.interval_ms / 1000.0):
            try:
                self._tick()
            except Exception as e:
                logger.warning(f"Counter read failed: {e}")

    def start(self):
        self._state = _CounterState()
        self._stop_event.clear()
        self._tick()
        self._start_ms = self._state.last_ms
        self._thread = threading.Thread(target=self._loop, name="energy-counter", daemon=True)
        self._thread.start()
        logger.info(f"Counter collector started on {self.path} every {self.interval_ms} ms")

    def stop(self) -> EnergyReading:
        if self._thread is None:
            raise RuntimeError("collector was never started")
        self._stop_event.set()
        self._thread.join()
        self._thread = None
        self._tick()
        self._end_ms = self._state.last_ms
        reading = EnergyReading.from_joules(self._state.joules, self.name, self._end_ms - self._start_ms)
        logger.info(f"Counter collector stopped: {reading.joules:.3f} J over {reading.window_ms} ms")
        return reading

    @property
    def samples(self) -> List[PowerSample]:
        with self._lock:
            return list(self._state.samples)

    def window(self) -> Tuple[int, int]:
        return self._start_ms, self._end_ms

    def describe(self) -> str:
        return f"{self.name.value}:{self.path}"


def parse_power_source(source: str, max_range_uj: Optional[int] = None, interval_ms: int = DEFAULT_INTERVAL_MS) -> EnergyProvider:
    """
    Build a provider from a `--power-source` value:
    `counter:<path>`, `constant:<watts>` or `trace:<path>`.
    """
    kind, _, arg = source.partition(":")
    if not arg:
        raise ValueError(f"power source '{source}' must look like counter:<path>, constant:<watts> or trace:<path>")
    if kind == "constant":
        try:
            watts = float(arg)
        except ValueError as e:
            raise ValueError(f"constant power must be a number of watts, got '{arg}'") from e
        if not _is_valid_watts(watts):
            raise ValueError(f"constant power must be finite and non-negative, got '{arg}'")
        return ConstantPowerProvider(watts)
    if kind == "trace":
        return TraceReplayProvider(arg)
    if kind == "counter":
        return CounterFileProvider(arg, max_range_uj=max_range_uj, interval_ms=interval_ms)
    raise ValueError(f"unknown power source kind '{kind}' (expected counter, constant or trace)")
