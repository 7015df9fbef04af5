"""
Uniform affine weight quantization

Per-tensor min-max quantization of 32-bit weights onto 2^b integer levels:

    delta = (max(w) - min(w)) / (2^b - 1)
    code  = round((w - min(w)) / delta)      # half away from zero
    w'    = code * delta + min(w)

Constant tensors (max == min) quantize to delta 0 and all-zero codes.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from errors import BitsOutOfRange, EmptyTensor, MalformedInputFile, MalformedTensor, NonFiniteInput

MIN_BITS = 2
MAX_BITS = 8
DEFAULT_BITS = 4

# Two 32-bit affine parameters (delta, minimum) stored next to the codes.
AFFINE_PARAM_BYTES = 8


def _check_shape(shape: Sequence[int], count: int, allow_empty: bool = False) -> Tuple[int, ...]:
    shape = tuple(int(d) for d in shape)
    smallest = 0 if allow_empty else 1
    if not shape or any(d < smallest for d in shape):
        raise MalformedTensor(f"shape must be a non-empty list of positive sizes, got {shape}")
    if math.prod(shape) != count:
        raise MalformedTensor(f"shape {shape} holds {math.prod(shape)} elements but {count} values were given")
    return shape


@dataclass(frozen=True, eq=False)
class WeightTensor:
    """
    A 32-bit floating-point tensor in row-major order.

    Args:
        shape: Dimension sizes, all positive
        values: Flat float32 array with product(shape) elements
    """
    shape: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float32).reshape(-1))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", _check_shape(self.shape, values.size, allow_empty=True))

    @classmethod
    def from_array(cls, array) -> "WeightTensor":
        array = np.asarray(array, dtype=np.float32)
        return cls(shape=array.shape or (1,), values=array.reshape(-1))

    @property
    def size(self) -> int:
        return int(self.values.size)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)


@dataclass(frozen=True, eq=False)
class QuantizedTensor:
    """
    b-bit integer codes plus the affine parameters that reconstruct them.

    Args:
        shape: Dimension sizes of the source tensor
        codes: One unsigned code per element, each in [0, 2^bits - 1]
        bits: Code width b, 2 to 8
        delta: Step size (float32), 0 for constant tensors
        minimum: min(w) of the source tensor (float32)
    """
    shape: Tuple[int, ...]
    codes: np.ndarray
    bits: int
    delta: float
    minimum: float

    def __post_init__(self):
        _check_bits(self.bits)
        codes = np.asarray(self.codes).reshape(-1)
        if codes.size and (codes.min() < 0 or codes.max() > levels(self.bits) - 1):
            raise MalformedTensor(
                f"codes must lie in [0, {levels(self.bits) - 1}] for {self.bits}-bit tensors"
            )
        codes = np.ascontiguousarray(codes, dtype=np.uint8)
        codes.setflags(write=False)
        delta = float(np.float32(self.delta))
        if not math.isfinite(delta) or delta < 0:
            raise MalformedTensor(f"delta must be finite and non-negative, got {self.delta}")
        if delta == 0 and codes.any():
            raise MalformedTensor("a zero delta requires all codes to be zero")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "minimum", float(np.float32(self.minimum)))
        object.__setattr__(self, "shape", _check_shape(self.shape, codes.size))

    @property
    def size(self) -> int:
        return int(self.codes.size)


@dataclass(frozen=True)
class QuantErrorStats:
    max_abs_error: float
    mean_squared_error: float
    delta: float


def levels(bits: int) -> int:
    return 1 << bits


def _check_bits(bits: int):
    if isinstance(bits, bool) or not isinstance(bits, (int, np.integer)) or not MIN_BITS <= bits <= MAX_BITS:
        raise BitsOutOfRange(f"bits must be an integer in [{MIN_BITS}, {MAX_BITS}], got {bits!r}")


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(w: WeightTensor, bits: int = DEFAULT_BITS) -> QuantizedTensor:
    """
    Quantize a weight tensor to b-bit codes.

    Args:
        w: Tensor to quantize
        bits: Code width, 2 to 8 (default 4)

    Returns:
        QuantizedTensor with delta = (max - min) / (2^bits - 1)

    Raises:
        EmptyTensor: If w has no elements
        NonFiniteInput: If w contains NaN or infinity
        BitsOutOfRange: If bits is outside [2, 8]

    Example:
        >>> q = quantize(WeightTensor((3,), [0.0, 0.5, 1.0]), bits=4)
        >>> q.codes.tolist()
        [0, 8, 15]
    """
    if w.size == 0:
        raise EmptyTensor("cannot quantize an empty tensor")
    if not np.all(np.isfinite(w.values)):
        raise NonFiniteInput("tensor contains NaN or infinite values")
    _check_bits(bits)

    values = w.values.astype(np.float64)
    minimum = float(w.values.min())
    maximum = float(w.values.max())
    step = (maximum - minimum) / (levels(bits) - 1)
    delta = float(np.float32(step))

    # delta can underflow float32 for subnormal ranges; treat those as constant
    if maximum == minimum or delta == 0.0:
        codes = np.zeros(w.size, dtype=np.uint8)
        return QuantizedTensor(shape=w.shape, codes=codes, bits=bits, delta=0.0, minimum=minimum)

    # codes use the float64 step; only the stored parameter is float32
    scaled = _round_half_away((values - minimum) / step)
    codes = np.clip(scaled, 0, levels(bits) - 1).astype(np.uint8)
    return QuantizedTensor(shape=w.shape, codes=codes, bits=bits, delta=delta, minimum=minimum)


def _reconstruct(q: QuantizedTensor) -> np.ndarray:
    """Dequantized values in float64, before the float32 storage cast."""
    if q.delta == 0.0:
        return np.full(q.size, q.minimum, dtype=np.float64)
    return q.codes.astype(np.float64) * q.delta + q.minimum


def dequantize(q: QuantizedTensor) -> WeightTensor:
    """
    Reconstruct a weight tensor from its codes: code * delta + minimum.

    Example:
        >>> dequantize(QuantizedTensor((2,), [0, 15], 4, 1.0, 0.0)).values.tolist()
        [0.0, 15.0]
    """
    return WeightTensor(shape=q.shape, values=_reconstruct(q).astype(np.float32))


def quant_error(w: WeightTensor, bits: int = DEFAULT_BITS) -> QuantErrorStats:
    """
    Elementwise error between w and its quantize/dequantize round trip.

    Errors are measured against the float64 reconstruction so the figures
    describe the quantizer, not the float32 storage cast.
    """
    q = quantize(w, bits)
    diff = _reconstruct(q) - w.values.astype(np.float64)
    return QuantErrorStats(
        max_abs_error=float(np.max(np.abs(diff))),
        mean_squared_error=float(np.mean(diff * diff)),
        delta=q.delta,
    )


def memory_footprint(t: Union[WeightTensor, QuantizedTensor]) -> int:
    """
    Storage size in bytes.

    WeightTensor: 4 bytes per element. QuantizedTensor: packed codes,
    ceil(n * bits / 8), plus 8 bytes of affine parameters.
    """
    if isinstance(t, QuantizedTensor):
        return (t.size * t.bits + 7) // 8 + AFFINE_PARAM_BYTES
    return 4 * t.size


def footprint_ratio(w: WeightTensor, q: QuantizedTensor) -> float:
    return memory_footprint(q) / memory_footprint(w)


# Text fixture format: line 1 shape, line 2 values

def load_tensor(path) -> WeightTensor:
    """
    Read a tensor fixture: first line space-separated shape, second line
    space-separated decimal values.
    """
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if len(lines) < 2:
        raise MalformedInputFile(f"{path}: expected a shape line and a values line")
    try:
        shape = [int(x) for x in lines[0].split()]
        values = [float(x) for x in lines[1].split()]
    except ValueError as e:
        raise MalformedInputFile(f"{path}: {e}") from e
    return WeightTensor(shape=shape, values=values)


def save_tensor(w: WeightTensor, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(" ".join(str(d) for d in w.shape) + "\n")
        f.write(" ".join(repr(float(v)) for v in w.values) + "\n")


def save_quantized(q: QuantizedTensor, path):
    """
    Write a quantized tensor: line 1 shape, line 2 `bits delta minimum`,
    line 3 codes.
    """
    with open(path, "w", encoding="utf-8") as f:
        f.write(" ".join(str(d) for d in q.shape) + "\n")
        f.write(f"{q.bits} {q.delta!r} {q.minimum!r}\n")
        f.write(" ".join(str(int(c)) for c in q.codes) + "\n")


def load_quantized(path) -> QuantizedTensor:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if len(lines) < 3:
        raise MalformedInputFile(f"{path}: expected shape, parameter and codes lines")
    try:
        shape = [int(x) for x in lines[0].split()]
        bits_str, delta_str, minimum_str = lines[1].split()
        codes = [int(x) for x in lines[2].split()]
    except ValueError as e:
        raise MalformedInputFile(f"{path}: {e}") from e
    return QuantizedTensor(
        shape=shape,
        codes=np.asarray(codes, dtype=np.int64),
        bits=int(bits_str),
        delta=float(delta_str),
        minimum=float(minimum_str),
    )
