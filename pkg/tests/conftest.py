import numpy as np
import pytest

from flowscat.ingest import FlowTable, Schema


def simple_schema(n_numeric=2, categoricals=("PROTO",)):
    columns = {"SRC": "endpoint", "DST": "endpoint"}
    for c in categoricals:
        columns[c] = "categorical"
    for i in range(n_numeric):
        columns[f"F{i}"] = "numeric"
    columns["LABEL"] = "label"
    return Schema(columns=columns)


def make_table(src, dst, labels, numerics=None, cats=None, schema=None):
    """Build a FlowTable directly from plain lists for unit tests."""
    n = len(src)
    numerics = numerics if numerics is not None else [[0.0, 0.0]] * n
    numerics = np.asarray(numerics, dtype=np.float64)
    if numerics.ndim != 2:
        numerics = numerics.reshape(n, 2) if n == 0 else numerics.reshape(n, -1)
    cats = cats if cats is not None else ["tcp"] * n
    if schema is None:
        schema = simple_schema(n_numeric=numerics.shape[1])
    columns = {}
    for c in schema.categorical_columns:
        columns[c] = np.array(cats, dtype=object)
    for j, c in enumerate(schema.numeric_columns):
        columns[c] = numerics[:, j].copy()
    return FlowTable(
        schema=schema,
        src_ids=np.array(src, dtype=object),
        dst_ids=np.array(dst, dtype=object),
        columns=columns,
        labels=np.array(labels, dtype=np.int64),
        attack_types=None,
        row_ids=np.arange(n, dtype=np.int64),
    )


@pytest.fixture(scope="session")
def reference_bank():
    from flowscat.scattering import ScatteringConfig, build_filterbank

    return build_filterbank(ScatteringConfig(J=4, Q=16, T=64))
