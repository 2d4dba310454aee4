"""LIBSVM text-format ingestion and deterministic minibatch iteration.

Format: one example per line, `label idx:val idx:val ...` with 1-based,
strictly increasing feature indices. Missing indices are implicit zeros.
Blank lines and lines starting with '#' are skipped.
"""

from dataclasses import dataclass, field

import numpy as np


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input; carries the 1-based source line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass
class SparseExample:
    label: float
    features: list[tuple[int, float]]  # (index, value), indices strictly increasing


@dataclass
class Dataset:
    examples: list[SparseExample]
    dim: int
    label_map: dict[float, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.examples)

    def labels(self) -> np.ndarray:
        return np.array([ex.label for ex in self.examples], dtype=float)

    def to_dense(self) -> np.ndarray:
        """Dense (n_examples, dim) matrix; absent indices are zeros."""
        out = np.zeros((len(self.examples), self.dim))
        for row, ex in enumerate(self.examples):
            for idx, val in ex.features:
                out[row, idx - 1] = val
        return out


def parse_libsvm_line(line: str, lineno: int | None = None) -> SparseExample:
    """Parse one `label idx:val ...` line; raises LibsvmParseError on bad input."""
    tokens = line.split()
    if not tokens:
        raise LibsvmParseError("empty line", lineno)
    try:
        label = float(tokens[0])
    except ValueError:
        raise LibsvmParseError(f"label is not numeric: {tokens[0]!r}", lineno) from None
    features = []
    prev_idx = 0
    for token in tokens[1:]:
        idx_s, sep, val_s = token.partition(":")
        if not sep:
            raise LibsvmParseError(f"malformed feature pair: {token!r}", lineno)
        try:
            idx = int(idx_s)
            val = float(val_s)
        except ValueError:
            raise LibsvmParseError(f"non-numeric feature pair: {token!r}", lineno) from None
        if idx <= prev_idx:
            raise LibsvmParseError(
                f"feature index {idx} not strictly increasing (previous {prev_idx})", lineno
            )
        features.append((idx, val))
        prev_idx = idx
    return SparseExample(label=label, features=features)


def load_dataset(path) -> Dataset:
    """Load a LIBSVM file; labels are kept verbatim (see normalize_labels)."""
    examples = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            examples.append(parse_libsvm_line(stripped, lineno))
    dim = max((idx for ex in examples for idx, _ in ex.features), default=0)
    return Dataset(examples=examples, dim=dim)


def normalize_labels(dataset: Dataset, rule: dict[float, float] | None = None) -> Dataset:
    """Return a copy of the dataset with labels mapped to {-1, +1}.

    Without an explicit rule: labels already in {-1, +1} are kept; {0, 1}
    maps to {-1, +1}; {1, 2} maps to {+1, -1}; three or more classes map
    one-vs-rest with the most frequent class as +1 (frequency ties broken
    toward the smallest label). Anything else is an error naming the
    distinct labels seen.
    """
    labels = [ex.label for ex in dataset.examples]
    distinct = sorted(set(labels))
    if rule is None:
        if set(distinct) <= {-1.0, 1.0}:
            mapping = {lab: lab for lab in distinct}
        elif set(distinct) == {0.0, 1.0}:
            mapping = {0.0: -1.0, 1.0: 1.0}
        elif set(distinct) == {1.0, 2.0}:
            mapping = {1.0: 1.0, 2.0: -1.0}
        elif len(distinct) >= 3:
            counts = {lab: 0 for lab in distinct}
            for lab in labels:
                counts[lab] += 1
            top = max(distinct, key=lambda lab: (counts[lab], -lab))
            mapping = {lab: (1.0 if lab == top else -1.0) for lab in distinct}
        else:
            raise ValueError(
                f"no label normalization rule for label set {distinct}; pass an explicit mapping"
            )
    else:
        missing = [lab for lab in distinct if lab not in rule]
        if missing:
            raise ValueError(f"label mapping does not cover labels {missing}")
        if not set(rule.values()) <= {-1.0, 1.0}:
            raise ValueError("label mapping values must be -1 or +1")
        mapping = {lab: float(rule[lab]) for lab in distinct}
    mapped = [
        SparseExample(label=mapping[ex.label], features=list(ex.features))
        for ex in dataset.examples
    ]
    return Dataset(examples=mapped, dim=dataset.dim, label_map=dict(mapping))


def serialize_dataset(dataset: Dataset) -> str:
    """LIBSVM text for the dataset; floats use repr so a re-parse is lossless."""
    lines = []
    for ex in dataset.examples:
        parts = [repr(float(ex.label))] + [f"{idx}:{float(val)!r}" for idx, val in ex.features]
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_dataset(dataset))


def minibatch_iter(dataset, batch_size: int, epoch_seed) -> list[np.ndarray]:
    """One epoch of minibatch index arrays: a seeded permutation split into
    consecutive batches (the last possibly smaller). Every index appears
    exactly once."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    n = dataset if isinstance(dataset, int) else len(dataset)
    rng = np.random.default_rng(epoch_seed)
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


class MinibatchStream:
    """Endless minibatch index source: epoch e is a fresh permutation seeded
    from (seed, e), partitioned in order. Deterministic given the seed."""

    def __init__(self, n: int, batch_size: int, seed):
        if n < 1:
            raise ValueError("need at least one example")
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        self.n = n
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0
        self._pending: list[np.ndarray] = []

    def next_batch(self) -> np.ndarray:
        if not self._pending:
            epoch_seed = np.random.SeedSequence([int(self.seed), self.epoch])
            self._pending = minibatch_iter(self.n, self.batch_size, epoch_seed)
            self.epoch += 1
        return self._pending.pop(0)
