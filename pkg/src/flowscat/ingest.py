"""Flow-record ingestion and preprocessing.

Parses NetFlow-style CSVs into columnar tables, then applies the
experiment protocol: stratified downsampling, scenario-controlled
train/test splitting, categorical encoding, and train-fitted per-column
L2 scaling. All operations are pure: tables are never mutated in place
and every random choice is driven by an explicit seed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import yaml
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    DimensionMismatch,
    EmptyTable,
    InsufficientAttacks,
    InvalidConfig,
    MalformedRow,
    MissingHeader,
    NoCategoricalsWarning,
    SchemaMismatch,
)

ROLES = ("endpoint", "categorical", "numeric", "excluded", "label", "attack_type")


@dataclass(frozen=True)
class Schema:
    """Column-role map for a flow CSV.

    Exactly two ``endpoint`` columns (first one is the flow source) and
    exactly one ``label`` column are required; ``attack_type`` is
    optional. ``excluded`` columns (ports) are parsed but never enter
    feature vectors.
    """

    columns: dict[str, str]

    def __post_init__(self):
        bad = {c: r for c, r in self.columns.items() if r not in ROLES}
        if bad:
            raise InvalidConfig(f"unknown column roles: {bad}")
        endpoints = [c for c, r in self.columns.items() if r == "endpoint"]
        labels = [c for c, r in self.columns.items() if r == "label"]
        attack = [c for c, r in self.columns.items() if r == "attack_type"]
        if len(endpoints) != 2:
            raise InvalidConfig(
                f"schema must name exactly two endpoint columns, got {endpoints}"
            )
        if len(labels) != 1:
            raise InvalidConfig(
                f"schema must name exactly one label column, got {labels}"
            )
        if len(attack) > 1:
            raise InvalidConfig("at most one attack_type column allowed")

    @property
    def src_column(self) -> str:
        return [c for c, r in self.columns.items() if r == "endpoint"][0]

    @property
    def dst_column(self) -> str:
        return [c for c, r in self.columns.items() if r == "endpoint"][1]

    @property
    def label_column(self) -> str:
        return [c for c, r in self.columns.items() if r == "label"][0]

    @property
    def attack_column(self) -> str | None:
        cols = [c for c, r in self.columns.items() if r == "attack_type"]
        return cols[0] if cols else None

    @property
    def categorical_columns(self) -> list[str]:
        return [c for c, r in self.columns.items() if r == "categorical"]

    @property
    def numeric_columns(self) -> list[str]:
        return [c for c, r in self.columns.items() if r == "numeric"]

    @property
    def feature_columns(self) -> list[str]:
        """Categorical + numeric columns in header order."""
        return [c for c, r in self.columns.items() if r in ("categorical", "numeric")]


def load_schema(path) -> Schema:
    """Read a column→role mapping from a YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or "columns" not in raw:
        raise InvalidConfig(f"schema file {path} must contain a 'columns' mapping")
    return Schema(columns=dict(raw["columns"]))


@dataclass(frozen=True)
class FlowRecord:
    """Row-wise view of one flow."""

    src_id: str
    dst_id: str
    categoricals: dict
    numerics: np.ndarray
    label: int
    attack_type: str | None


@dataclass
class FlowTable:
    """Columnar table of flow records.

    ``columns`` holds every categorical/numeric feature column keyed by
    name; categorical columns are string arrays until an encoder
    replaces them with floats (``encoded`` flips to True). ``row_ids``
    are the original CSV data-row indices, preserved through
    downsampling and splitting so verdicts map back to source rows.
    """

    schema: Schema
    src_ids: np.ndarray
    dst_ids: np.ndarray
    columns: dict[str, np.ndarray]
    labels: np.ndarray
    attack_types: np.ndarray | None
    row_ids: np.ndarray
    encoded: bool = False
    fitted_params: dict | None = field(default=None, repr=False)

    @property
    def n_rows(self) -> int:
        return int(self.labels.shape[0])

    def record(self, i: int) -> FlowRecord:
        cats = {c: self.columns[c][i] for c in self.schema.categorical_columns}
        nums = np.array([self.columns[c][i] for c in self.schema.numeric_columns],
                        dtype=np.float64)
        return FlowRecord(
            src_id=str(self.src_ids[i]),
            dst_id=str(self.dst_ids[i]),
            categoricals=cats,
            numerics=nums,
            label=int(self.labels[i]),
            attack_type=None if self.attack_types is None else str(self.attack_types[i]),
        )

    def take(self, idx: np.ndarray) -> "FlowTable":
        """Row subset; preserves column order and row id mapping."""
        idx = np.asarray(idx)
        return FlowTable(
            schema=self.schema,
            src_ids=self.src_ids[idx],
            dst_ids=self.dst_ids[idx],
            columns={c: v[idx] for c, v in self.columns.items()},
            labels=self.labels[idx],
            attack_types=None if self.attack_types is None else self.attack_types[idx],
            row_ids=self.row_ids[idx],
            encoded=self.encoded,
            fitted_params=self.fitted_params,
        )

    def feature_matrix(self) -> tuple[np.ndarray, list[str]]:
        """All feature columns as a float matrix, in header order.

        Requires categorical columns to have been encoded already.
        """
        names = self.schema.feature_columns
        if not self.encoded and self.schema.categorical_columns:
            raise InvalidConfig(
                "categorical columns must be encoded before assembling features"
            )
        if not names:
            return np.zeros((self.n_rows, 0)), []
        mat = np.column_stack([np.asarray(self.columns[c], dtype=np.float64)
                               for c in names])
        return mat, names

    def with_features(self, matrix: np.ndarray, names: list[str]) -> "FlowTable":
        """Copy of the table with feature columns replaced by ``matrix``."""
        cols = dict(self.columns)
        for j, name in enumerate(names):
            cols[name] = matrix[:, j].copy()
        return replace(self, columns=cols, encoded=True)

    def to_csv(self, path) -> None:
        """Serialize in the original column layout (RFC-4180)."""
        header = list(self.schema.columns.keys())
        s = self.schema
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n_rows):
                row = []
                for c in header:
                    role = s.columns[c]
                    if c == s.src_column:
                        row.append(str(self.src_ids[i]))
                    elif c == s.dst_column:
                        row.append(str(self.dst_ids[i]))
                    elif role == "label":
                        row.append(str(int(self.labels[i])))
                    elif role == "attack_type":
                        row.append("" if self.attack_types is None
                                   else str(self.attack_types[i]))
                    elif role == "excluded":
                        row.append("")
                    else:
                        v = self.columns[c][i]
                        row.append(repr(float(v)) if self.encoded or role == "numeric"
                                   else str(v))
                writer.writerow(row)


@dataclass(frozen=True)
class ScenarioSpec:
    """Experiment scenario: downsampling ratio, split, and the attack
    fraction permitted in the training set."""

    downsample_fraction: float = 0.1
    train_fraction: float = 0.7
    contamination: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.downsample_fraction <= 1.0:
            raise InvalidConfig("downsample_fraction must be in (0, 1]")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfig("train_fraction must be in (0, 1)")
        if not 0.0 <= self.contamination < 1.0:
            raise InvalidConfig("contamination must be in [0, 1)")


def _parse_numeric(cell: str) -> float:
    """Numeric cell → float; empty, unparsable, or non-finite → NaN.

    NaN marks the cell as missing so the sanitizer can zero-fill it
    (zeros represent inactivity downstream).
    """
    text = cell.strip()
    if not text:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        return math.nan
    return value if math.isfinite(value) else math.nan


def parse_netflow(path, schema: Schema) -> FlowTable:
    """Parse a flow CSV into a FlowTable under the given schema.

    The CSV header must contain exactly the schema's columns (roles
    partition all columns). Port columns tagged ``excluded`` are
    dropped from feature storage.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader(f"{path} is empty") from None
        header = [h.strip() for h in header]

        declared = set(schema.columns)
        present = set(header)
        missing = declared - present
        if missing:
            raise SchemaMismatch(f"schema columns absent from header: {sorted(missing)}")
        extra = present - declared
        if extra:
            raise SchemaMismatch(f"header columns not in schema: {sorted(extra)}")

        col_pos = {c: header.index(c) for c in schema.columns}
        src_pos = col_pos[schema.src_column]
        dst_pos = col_pos[schema.dst_column]
        label_pos = col_pos[schema.label_column]
        attack_pos = col_pos[schema.attack_column] if schema.attack_column else None
        cat_cols = schema.categorical_columns
        num_cols = schema.numeric_columns

        src, dst, labels, attacks = [], [], [], []
        cats = {c: [] for c in cat_cols}
        nums = {c: [] for c in num_cols}

        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedRow(
                    line_no, f"expected {len(header)} fields, got {len(row)}"
                )
            s, d = row[src_pos].strip(), row[dst_pos].strip()
            if not s or not d:
                raise MalformedRow(line_no, "empty endpoint identifier")
            raw_label = row[label_pos].strip()
            try:
                label = int(float(raw_label))
            except ValueError:
                raise MalformedRow(line_no, f"unparsable label {raw_label!r}") from None
            if label not in (0, 1):
                raise MalformedRow(line_no, f"label must be 0 or 1, got {label}")
            src.append(s)
            dst.append(d)
            labels.append(label)
            if attack_pos is not None:
                attacks.append(row[attack_pos].strip())
            for c in cat_cols:
                cats[c].append(row[col_pos[c]].strip())
            for c in num_cols:
                nums[c].append(_parse_numeric(row[col_pos[c]]))

    columns: dict[str, np.ndarray] = {}
    for c in cat_cols:
        columns[c] = np.array(cats[c], dtype=object)
    for c in num_cols:
        columns[c] = np.array(nums[c], dtype=np.float64)

    return FlowTable(
        schema=schema,
        src_ids=np.array(src, dtype=object),
        dst_ids=np.array(dst, dtype=object),
        columns=columns,
        labels=np.array(labels, dtype=np.int64),
        attack_types=np.array(attacks, dtype=object) if attack_pos is not None else None,
        row_ids=np.arange(len(src), dtype=np.int64),
    )


def downsample(table: FlowTable, fraction: float, seed: int) -> FlowTable:
    """Keep ceil(fraction * n) rows, stratified by binary label.

    Class proportions are preserved to within one record per class;
    surviving rows keep their original relative order so fraction=1.0
    is the identity.
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidConfig("fraction must be in (0, 1]")
    n = table.n_rows
    if n == 0:
        raise EmptyTable("cannot downsample an empty table")

    attack_idx = np.flatnonzero(table.labels == 1)
    benign_idx = np.flatnonzero(table.labels == 0)
    k_total = math.ceil(fraction * n)
    k_attack = min(math.ceil(fraction * attack_idx.size), k_total) if attack_idx.size else 0
    k_benign = k_total - k_attack
    if k_benign > benign_idx.size:
        # mostly-attack table: give the shortfall back to the attack class
        k_benign = benign_idx.size
        k_attack = k_total - k_benign

    rng = np.random.default_rng(seed)
    keep_attack = rng.permutation(attack_idx)[:k_attack]
    keep_benign = rng.permutation(benign_idx)[:k_benign]
    keep = np.sort(np.concatenate([keep_attack, keep_benign]))
    return table.take(keep)


def split_scenario(table: FlowTable, spec: ScenarioSpec) -> tuple[FlowTable, FlowTable]:
    """Split into train/test under the scenario's contamination rule.

    contamination=0 yields an attack-free training set (displaced
    attack rows all land in test); contamination=c>0 places exactly
    ceil(c * n_train) attack rows in train. Test rows keep their true
    labels for evaluation only.
    """
    n = table.n_rows
    if n == 0:
        raise EmptyTable("cannot split an empty table")

    n_train = math.ceil(spec.train_fraction * n)
    attack_idx = np.flatnonzero(table.labels == 1)
    benign_idx = np.flatnonzero(table.labels == 0)

    n_attack_train = math.ceil(spec.contamination * n_train) if spec.contamination > 0 else 0
    if n_attack_train > attack_idx.size:
        raise InsufficientAttacks(spec.contamination, attack_idx.size / n_train)
    n_benign_train = n_train - n_attack_train
    if n_benign_train > benign_idx.size:
        raise EmptyTable(
            f"not enough benign rows for a train set of {n_train} "
            f"({benign_idx.size} available)"
        )

    rng = np.random.default_rng(spec.seed)
    train_attack = rng.permutation(attack_idx)[:n_attack_train]
    train_benign = rng.permutation(benign_idx)[:n_benign_train]
    train_idx = np.sort(np.concatenate([train_attack, train_benign]))
    mask = np.ones(n, dtype=bool)
    mask[train_idx] = False
    test_idx = np.flatnonzero(mask)
    return table.take(train_idx), table.take(test_idx)


class TargetEncoder(BaseEstimator, TransformerMixin):
    """Smoothed mean-label encoding for categorical flow features.

    Each category maps to (count * mean + m * prior) / (count + m)
    where the prior is the training attack rate; unseen categories at
    transform time fall back to the prior.
    """

    def __init__(self, smoothing: float = 10.0):
        self.smoothing = smoothing

    def fit(self, table: FlowTable, y=None):
        cats = table.schema.categorical_columns
        self.prior_ = float(table.labels.mean()) if table.n_rows else 0.0
        self.mappings_ = {}
        if not cats:
            warnings.warn("no categorical columns to encode", NoCategoricalsWarning)
            return self
        labels = table.labels.astype(np.float64)
        for col in cats:
            values = table.columns[col]
            mapping = {}
            for cat in sorted(set(values.tolist())):
                sel = values == cat
                count = int(sel.sum())
                mean = float(labels[sel].mean())
                mapping[cat] = (count * mean + self.smoothing * self.prior_) / (
                    count + self.smoothing
                )
            self.mappings_[col] = mapping
        return self

    def transform(self, table: FlowTable) -> FlowTable:
        cols = dict(table.columns)
        for col, mapping in self.mappings_.items():
            values = table.columns[col]
            cols[col] = np.array(
                [mapping.get(v, self.prior_) for v in values.tolist()],
                dtype=np.float64,
            )
        return replace(table, columns=cols, encoded=True)

    def to_params(self) -> dict:
        return {"kind": "target", "prior": self.prior_,
                "smoothing": self.smoothing, "mappings": self.mappings_}


class FrequencyEncoder(BaseEstimator, TransformerMixin):
    """Label-free fallback: category → training relative frequency."""

    def fit(self, table: FlowTable, y=None):
        cats = table.schema.categorical_columns
        self.mappings_ = {}
        if not cats:
            warnings.warn("no categorical columns to encode", NoCategoricalsWarning)
            return self
        n = max(table.n_rows, 1)
        for col in cats:
            values, counts = np.unique(table.columns[col].astype(str), return_counts=True)
            self.mappings_[col] = {v: c / n for v, c in zip(values.tolist(),
                                                            counts.tolist())}
        return self

    def transform(self, table: FlowTable) -> FlowTable:
        cols = dict(table.columns)
        for col, mapping in self.mappings_.items():
            values = table.columns[col]
            cols[col] = np.array(
                [mapping.get(str(v), 0.0) for v in values.tolist()], dtype=np.float64
            )
        return replace(table, columns=cols, encoded=True)

    def to_params(self) -> dict:
        return {"kind": "frequency", "mappings": self.mappings_}


def fit_target_encoding(train: FlowTable, smoothing: float = 10.0) -> TargetEncoder:
    """Fit the smoothed mean-label encoder on a training table."""
    return TargetEncoder(smoothing=smoothing).fit(train)


def make_encoder(kind: str):
    if kind == "target":
        return TargetEncoder()
    if kind == "frequency":
        return FrequencyEncoder()
    raise InvalidConfig(f"unknown encoding kind {kind!r}")


class ColumnL2Scaler(BaseEstimator, TransformerMixin):
    """Per-feature L2 scaling with parameters fitted on train only.

    Missing/non-finite cells are zero-filled before the column norms
    are computed, so stray infinities cannot poison the scale factors.
    Zero-norm columns are left as zeros.
    """

    def fit(self, X, y=None):
        X = np.nan_to_num(np.asarray(X, dtype=np.float64),
                          nan=0.0, posinf=0.0, neginf=0.0)
        self.scales_ = np.linalg.norm(X, axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = np.nan_to_num(np.asarray(X, dtype=np.float64),
                          nan=0.0, posinf=0.0, neginf=0.0)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} feature columns, got {X.shape[1]}"
            )
        scales = np.where(self.scales_ > 0, self.scales_, 1.0)
        return X / scales


def sanitize_and_normalize(
    train: FlowTable, test: FlowTable
) -> tuple[FlowTable, FlowTable, dict]:
    """Zero-fill missing/infinite cells, then divide each feature column
    by its training-set L2 norm (the same factors are applied to test).

    Returns the transformed tables plus a params dict mapping each
    feature column to its scale factor.
    """
    train_mat, train_names = train.feature_matrix()
    test_mat, test_names = test.feature_matrix()
    if train_names != test_names:
        raise DimensionMismatch("train/test schemas differ")

    scaler = ColumnL2Scaler().fit(train_mat)
    train_out = train.with_features(scaler.transform(train_mat), train_names)
    test_out = test.with_features(scaler.transform(test_mat), test_names)
    params = {"column_scales": {name: float(s)
                                for name, s in zip(train_names, scaler.scales_)}}
    train_out.fitted_params = params
    test_out.fitted_params = params
    return train_out, test_out, params
