"""Labeled datasets with a binary label and a binary sensitive group.

Rows are (x, y, s) with y, s in {0, 1}. Group s=0 is the underprivileged
group throughout the toolkit. Datasets are immutable after construction and
all operations are pure given a seed, so they can be shared freely across
workers.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SUBGROUPS = ((0, 0), (0, 1), (1, 0), (1, 1))


def exact_count(fraction: float, n: int) -> int:
    """Deterministic rounded count: floor(fraction*n + 0.5), half rounds up."""
    return int(math.floor(fraction * n + 0.5))


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus per-row binary label y and binary group s."""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        groups = np.asarray(self.groups, dtype=np.int8)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n = features.shape[0]
        if n < 1:
            raise ValueError("dataset must have at least one row")
        if labels.shape != (n,) or groups.shape != (n,):
            raise ValueError("features, labels and groups must share row count")
        if not np.isfinite(features).all():
            raise ValueError("features contain non-finite values")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be exactly 0 or 1")
        if not np.isin(groups, (0, 1)).all():
            raise ValueError("groups must be exactly 0 or 1")
        if features.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length must match feature columns")
        for arr in (features, labels, groups):
            arr.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.features[idx], self.labels[idx], self.groups[idx], self.feature_names
        )

    def subgroup_indices(self, y: int, s: int) -> np.ndarray:
        return np.flatnonzero((self.labels == y) & (self.groups == s))

    def fingerprint(self) -> str:
        """SHA-256 over the raw array bytes and feature names."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        h.update(np.ascontiguousarray(self.groups).tobytes())
        h.update("\x1f".join(self.feature_names).encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class SubgroupStats:
    """Counts and probabilities of the four (y, s) subgroups."""

    counts: dict
    probs: dict
    imbalance_alpha: float
    degenerate: bool


def subgroup_stats(ds: LabeledDataset) -> SubgroupStats:
    """Subgroup counts, probabilities and the min/max imbalance ratio.

    With an empty subgroup the ratio is reported as 0 and the result is
    flagged degenerate instead of raising.
    """
    counts = {(y, s): int(len(ds.subgroup_indices(y, s))) for (y, s) in SUBGROUPS}
    n = ds.n
    probs = {ys: c / n for ys, c in counts.items()}
    degenerate = any(c == 0 for c in counts.values())
    if degenerate:
        alpha = 0.0
    else:
        values = list(probs.values())
        alpha = min(values) / max(values)
    return SubgroupStats(counts=counts, probs=probs, imbalance_alpha=alpha, degenerate=degenerate)


def stratified_split(
    ds: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Split per subgroup: round(test_fraction * n_ys) rows go to test.

    Rows are chosen uniformly without replacement from the seeded generator;
    train and test partition the input. Raises if a train subgroup would be
    emptied.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(np.uint64(seed))
    test_idx = []
    for y, s in SUBGROUPS:
        members = ds.subgroup_indices(y, s)
        if len(members) < 2:
            raise ValueError(f"subgroup (y={y}, s={s}) needs at least 2 members")
        k = exact_count(test_fraction, len(members))
        if k >= len(members):
            raise ValueError(f"subgroup (y={y}, s={s}) would be empty in train")
        chosen = rng.choice(members, size=k, replace=False)
        test_idx.append(chosen)
    test_mask = np.zeros(ds.n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    train = ds.subset(np.flatnonzero(~test_mask))
    test = ds.subset(np.flatnonzero(test_mask))
    return train, test


# --- CSV ingestion -------------------------------------------------------


@dataclass
class PreprocessSpec:
    """How to turn a raw CSV into a LabeledDataset.

    The sensitive column maps to s=0 either by exact value
    (underprivileged_value) or by numeric threshold (underprivileged_max,
    value <= threshold means s=0); every other value maps to s=1.
    """

    label_column: str
    positive_label: str
    sensitive_column: str
    underprivileged_value: str | None = None
    underprivileged_max: float | None = None
    dropped_columns: list = field(default_factory=list)
    categorical_columns: list = field(default_factory=list)
    numeric_columns: list = field(default_factory=list)

    def __post_init__(self):
        if self.label_column in self.dropped_columns:
            raise ValueError("label column cannot be dropped")
        if self.sensitive_column in self.dropped_columns:
            raise ValueError("sensitive column cannot be dropped")
        if self.underprivileged_value is None and self.underprivileged_max is None:
            raise ValueError("spec needs underprivileged_value or underprivileged_max")

    @classmethod
    def from_file(cls, path) -> "PreprocessSpec":
        """Parse a plain key = value config file (lists comma-separated)."""
        keys: dict[str, str] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad spec line: {raw!r}")
            key, value = line.split("=", 1)
            keys[key.strip()] = value.strip()

        def split_list(name):
            raw = keys.get(name, "")
            return [item.strip() for item in raw.split(",") if item.strip()]

        return cls(
            label_column=keys["label_column"],
            positive_label=keys["positive_label"],
            sensitive_column=keys["sensitive_column"],
            underprivileged_value=keys.get("underprivileged_value"),
            underprivileged_max=(
                float(keys["underprivileged_max"]) if "underprivileged_max" in keys else None
            ),
            dropped_columns=split_list("dropped_columns"),
            categorical_columns=split_list("categorical_columns"),
            numeric_columns=split_list("numeric_columns"),
        )


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    header = [name.strip() for name in header]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, rows


def _map_label(value: str, spec: PreprocessSpec) -> int:
    value = value.strip()
    if not value:
        raise ValueError(f"unmapped label value {value!r}")
    return 1 if value == spec.positive_label else 0


def _map_group(value: str, spec: PreprocessSpec) -> int:
    value = value.strip()
    if spec.underprivileged_max is not None:
        try:
            return 0 if float(value) <= spec.underprivileged_max else 1
        except ValueError:
            raise ValueError(f"non-numeric sensitive value {value!r}") from None
    return 0 if value == spec.underprivileged_value else 1


def compute_numeric_stats(path, spec: PreprocessSpec) -> dict:
    """(mean, std) per declared numeric column, computed over the whole file."""
    header, rows = _read_rows(path)
    _check_columns(header, spec)
    col = {name: i for i, name in enumerate(header)}
    stats = {}
    for name in spec.numeric_columns:
        values = np.array([_parse_numeric(row[col[name]], name) for row in rows])
        std = float(values.std())
        stats[name] = (float(values.mean()), std if std > 0 else 1.0)
    return stats


def _parse_numeric(value: str, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"non-numeric value {value!r} in numeric column {column!r}") from None


def _check_columns(header: list[str], spec: PreprocessSpec) -> None:
    named = (
        [spec.label_column, spec.sensitive_column]
        + spec.dropped_columns
        + spec.categorical_columns
        + spec.numeric_columns
    )
    missing = [name for name in named if name not in header]
    if missing:
        raise ValueError(f"columns missing from header: {missing}")
    known = set(named)
    unclassified = [name for name in header if name not in known]
    if unclassified:
        raise ValueError(f"columns not classified by spec: {unclassified}")


def load_csv(path, spec: PreprocessSpec, numeric_stats: dict | None = None) -> LabeledDataset:
    """Load a comma-separated UTF-8 file per the preprocess spec.

    Dropped columns are removed, categoricals one-hot encoded (one indicator
    per observed category, lexicographic order), numerics z-scored with the
    supplied statistics or with statistics computed from this file.
    """
    header, rows = _read_rows(path)
    _check_columns(header, spec)
    col = {name: i for i, name in enumerate(header)}

    labels = np.array([_map_label(row[col[spec.label_column]], spec) for row in rows], dtype=np.int8)
    groups = np.array([_map_group(row[col[spec.sensitive_column]], spec) for row in rows], dtype=np.int8)

    blocks, names = [], []
    if numeric_stats is None:
        numeric_stats = compute_numeric_stats(path, spec)
    for name in spec.numeric_columns:
        values = np.array([_parse_numeric(row[col[name]], name) for row in rows])
        mean, std = numeric_stats[name]
        blocks.append((values - mean) / std)
        names.append(name)
    for name in spec.categorical_columns:
        raw = [row[col[name]].strip() for row in rows]
        for category in sorted(set(raw)):
            blocks.append(np.array([1.0 if v == category else 0.0 for v in raw]))
            names.append(f"{name}={category}")

    if not blocks:
        raise ValueError("spec declares no feature columns")
    features = np.column_stack(blocks)
    return LabeledDataset(features, labels, groups, tuple(names))


def load_csv_train_test(
    path, spec: PreprocessSpec, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified split with z-score statistics taken from the train split only."""
    raw = load_csv(path, spec, numeric_stats={c: (0.0, 1.0) for c in spec.numeric_columns})
    train_raw, test_raw = stratified_split(raw, test_fraction, seed)
    numeric_idx = [raw.feature_names.index(c) for c in spec.numeric_columns]
    if not numeric_idx:
        return train_raw, test_raw
    mean = train_raw.features[:, numeric_idx].mean(axis=0)
    std = train_raw.features[:, numeric_idx].std(axis=0)
    std = np.where(std > 0, std, 1.0)

    def rescale(ds: LabeledDataset) -> LabeledDataset:
        feats = ds.features.copy()
        feats[:, numeric_idx] = (feats[:, numeric_idx] - mean) / std
        return LabeledDataset(feats, ds.labels, ds.groups, ds.feature_names)

    return rescale(train_raw), rescale(test_raw)


def write_csv(ds: LabeledDataset, path) -> None:
    """Serialize to the toolkit CSV format: feature columns, then label, group."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + ["label", "group"])
        for i in range(ds.n):
            writer.writerow(
                [repr(float(v)) for v in ds.features[i]]
                + [int(ds.labels[i]), int(ds.groups[i])]
            )


def read_csv(path) -> LabeledDataset:
    """Exact inverse of write_csv: all feature columns numeric, no re-scaling."""
    header, _ = _read_rows(path)
    if header[-2:] != ["label", "group"]:
        raise ValueError(f"{path}: not a toolkit dataset file (want trailing label,group)")
    feature_names = header[:-2]
    spec = PreprocessSpec(
        label_column="label",
        positive_label="1",
        sensitive_column="group",
        underprivileged_value="0",
        numeric_columns=feature_names,
    )
    identity = {name: (0.0, 1.0) for name in feature_names}
    return load_csv(path, spec, numeric_stats=identity)
