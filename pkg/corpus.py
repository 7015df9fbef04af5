"""
Labeled sentiment dataset and prompt rendering

Dataset CSV: UTF-8, header `text,label`, labels positive/negative/neutral in
any casing. Rows keep their file order.
"""

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from errors import BadLabel, EmptyText, MalformedInputFile, MissingHeader, SampleTooLarge
from evalmetrics import CLASS_ORDER, Label

PROMPT_TEMPLATE_PATH = Path(__file__).parent / "prompts" / "sentiment_assessment.txt"
CONTENT_PLACEHOLDER = "{content}"
DATASET_COLUMNS = ["text", "label"]


@dataclass(frozen=True)
class Example:
    text: str
    label: Label

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise EmptyText()
        label = Label(self.label)
        if label not in CLASS_ORDER:
            raise ValueError(f"gold label must be positive, negative or neutral, got {label.value}")
        object.__setattr__(self, "label", label)


@dataclass(frozen=True)
class Corpus:
    """
    Ordered examples plus where they came from.

    `subset_seed` and `subset_size` are set when the corpus is a subsample
    produced by `split`; `corpus_id` always identifies the full source.
    `source_size` is the size of the full source corpus.
    """
    examples: Tuple[Example, ...]
    source_path: str
    corpus_id: str = ""
    subset_seed: Optional[int] = None
    subset_size: Optional[int] = None
    source_size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.corpus_id:
            object.__setattr__(self, "corpus_id", content_id(self.examples))

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


def content_id(examples) -> str:
    """Stable digest of the examples, independent of file path."""
    digest = hashlib.sha256()
    for ex in examples:
        digest.update(ex.label.value.encode("utf-8"))
        digest.update(b"\x1f")
        digest.update(ex.text.encode("utf-8"))
        digest.update(b"\x1e")
    return digest.hexdigest()[:16]


def load_csv(path) -> Corpus:
    """
    Load a `text,label` dataset.

    Args:
        path: CSV file path

    Returns:
        Corpus with one Example per data row, labels lower-cased

    Raises:
        MissingHeader: If the header lacks `text` or `label`
        BadLabel: With the 1-based data row number
        EmptyText: With the 1-based data row number
        MalformedInputFile: If the CSV cannot be tokenized or decoded
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise MissingHeader(f"{path}: file is empty, expected header text,label") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise MalformedInputFile(f"{path}: not a readable UTF-8 text,label CSV ({e})") from e

    columns = [str(c).strip().lower() for c in df.columns]
    if any(c not in columns for c in DATASET_COLUMNS):
        raise MissingHeader(f"{path}: header must contain text,label (found {','.join(map(str, df.columns))})")
    df.columns = columns

    examples: List[Example] = []
    for row, (text, label) in enumerate(zip(df["text"], df["label"]), start=1):
        normalized = label.strip().lower()
        if normalized not in {c.value for c in CLASS_ORDER}:
            raise BadLabel(label, row)
        if not text.strip():
            raise EmptyText(row)
        examples.append(Example(text=text, label=Label(normalized)))

    return Corpus(examples=tuple(examples), source_path=os.fspath(path))


def save_csv(corpus: Corpus, path):
    """Write a corpus back out in the `text,label` format."""
    df = pd.DataFrame(
        {"text": [ex.text for ex in corpus], "label": [ex.label.value for ex in corpus]},
        columns=DATASET_COLUMNS,
    )
    df.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")


def prompt_template() -> str:
    return PROMPT_TEMPLATE_PATH.read_text(encoding="utf-8")


def build_prompt(text: str) -> str:
    """
    Render the sentiment assessment prompt for one text.

    The text is inserted verbatim, newlines included.

    Raises:
        EmptyText: If text is empty
    """
    if not text:
        raise EmptyText()
    return prompt_template().replace(CONTENT_PLACEHOLDER, text, 1)


def split(corpus: Corpus, n: int, seed: int) -> Corpus:
    """
    Deterministic subsample of n examples, kept in source order.

    Raises:
        SampleTooLarge: If n is not in [1, len(corpus)]
    """
    if not 1 <= n <= len(corpus):
        raise SampleTooLarge(f"cannot sample {n} example(s) from a corpus of {len(corpus)}")
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(corpus), size=n, replace=False))
    return Corpus(
        examples=tuple(corpus.examples[i] for i in picked),
        source_path=corpus.source_path,
        corpus_id=corpus.corpus_id,
        subset_seed=seed,
        subset_size=n,
        source_size=corpus.source_size or len(corpus),
    )
