"""
Desk-scale sentiment classifier

A 3-class linear model over hashed bag-of-words features, trained with an
averaged perceptron. Its (3 x dims) weight matrix is an ordinary
WeightTensor, so the full quantize -> infer -> measure path can run without
a language model.
"""

import re
import zlib
from typing import Union

import numpy as np

from corpus import Corpus
from errors import EmptyEvaluation, ShapeMismatch
from evalmetrics import CLASS_ORDER, Label
from quantcore import QuantizedTensor, WeightTensor, dequantize

DEFAULT_DIMS = 1024
DEFAULT_EPOCHS = 10

_TOKEN_PATTERN = re.compile(r"[a-z0-9']+")


def tokenize(text: str):
    return _TOKEN_PATTERN.findall(text.lower())


def featurize(text: str, dims: int) -> np.ndarray:
    """Token counts hashed into `dims` buckets (crc32, stable across runs)."""
    features = np.zeros(dims, dtype=np.float64)
    for token in tokenize(text):
        features[zlib.crc32(token.encode("utf-8")) % dims] += 1.0
    return features


def toy_classifier_train(
    corpus: Corpus,
    dims: int = DEFAULT_DIMS,
    seed: int = 0,
    epochs: int = DEFAULT_EPOCHS,
) -> WeightTensor:
    """
    Train the averaged perceptron.

    Example order is shuffled per epoch with a generator seeded by `seed`,
    so the same inputs always give bitwise-identical weights.

    Returns:
        WeightTensor of shape (3, dims), rows in positive/negative/neutral order
    """
    if len(corpus) == 0:
        raise EmptyEvaluation("cannot train on an empty corpus")
    if dims < 1:
        raise ShapeMismatch(f"dims must be positive, got {dims}")

    features = np.stack([featurize(ex.text, dims) for ex in corpus])
    golds = np.array([CLASS_ORDER.index(ex.label) for ex in corpus])

    weights = np.zeros((len(CLASS_ORDER), dims), dtype=np.float64)
    totals = np.zeros_like(weights)
    steps = 0
    rng = np.random.default_rng(seed)

    for _ in range(epochs):
        for i in rng.permutation(len(corpus)):
            x, gold = features[i], golds[i]
            predicted = int(np.argmax(weights @ x))
            if predicted != gold:
                weights[gold] += x
                weights[predicted] -= x
            totals += weights
            steps += 1

    return WeightTensor.from_array(totals / steps)


def _dense_weights(weights: Union[WeightTensor, QuantizedTensor]) -> np.ndarray:
    if isinstance(weights, QuantizedTensor):
        weights = dequantize(weights)
    if len(weights.shape) != 2 or weights.shape[0] != len(CLASS_ORDER):
        raise ShapeMismatch(f"classifier weights must be shaped (3, dims), got {weights.shape}")
    return weights.as_array().astype(np.float64)


def toy_classifier_predict(weights: Union[WeightTensor, QuantizedTensor], text: str) -> Label:
    """
    Highest-scoring class for a text.

    Quantized weights are dequantized first. Ties go to the earliest class in
    positive, negative, neutral order.

    Raises:
        ShapeMismatch: If weights are not (3, dims)
    """
    dense = _dense_weights(weights)
    scores = dense @ featurize(text, dense.shape[1])
    return CLASS_ORDER[int(np.argmax(scores))]


class ToyClassifier:
    """Prediction with the dense weight matrix prepared once."""

    def __init__(self, weights: Union[WeightTensor, QuantizedTensor]):
        self.weights = weights
        self._dense = _dense_weights(weights)

    @property
    def dims(self) -> int:
        return self._dense.shape[1]

    def predict(self, text: str) -> Label:
        scores = self._dense @ featurize(text, self.dims)
        return CLASS_ORDER[int(np.argmax(scores))]
