import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowscat.errors import (
    DimensionMismatch,
    EmptyTable,
    InsufficientAttacks,
    InvalidConfig,
    MalformedRow,
    MissingHeader,
    NoCategoricalsWarning,
    SchemaMismatch,
)
from flowscat.ingest import (
    ColumnL2Scaler,
    FrequencyEncoder,
    ScenarioSpec,
    Schema,
    TargetEncoder,
    downsample,
    fit_target_encoding,
    load_schema,
    parse_netflow,
    sanitize_and_normalize,
    split_scenario,
)

from conftest import make_table, simple_schema

CSV_SCHEMA = Schema(columns={
    "SRC": "endpoint", "DST": "endpoint", "SPORT": "excluded",
    "PROTO": "categorical", "BYTES": "numeric", "PKTS": "numeric",
    "LABEL": "label", "ATTACK": "attack_type",
})


def write_csv(path, rows, header="SRC,DST,SPORT,PROTO,BYTES,PKTS,LABEL,ATTACK"):
    path.write_text("\n".join([header] + rows) + "\n")


class TestParse:
    def test_basic_parse(self, tmp_path):
        p = tmp_path / "flows.csv"
        write_csv(p, ["a,b,80,tcp,100,3,0,", "b,c,53,udp,7,1,1,dos"])
        table = parse_netflow(p, CSV_SCHEMA)
        assert table.n_rows == 2
        assert list(table.src_ids) == ["a", "b"]
        assert list(table.labels) == [0, 1]
        assert table.attack_types[1] == "dos"
        # ports never enter feature storage
        assert "SPORT" not in table.columns
        rec = table.record(0)
        assert rec.src_id == "a" and rec.label == 0
        assert rec.categoricals == {"PROTO": "tcp"}
        np.testing.assert_allclose(rec.numerics, [100.0, 3.0])

    def test_empty_file_missing_header(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(MissingHeader):
            parse_netflow(p, CSV_SCHEMA)

    def test_schema_mismatch_both_directions(self, tmp_path):
        p = tmp_path / "flows.csv"
        write_csv(p, [], header="SRC,DST,SPORT,PROTO,BYTES,LABEL,ATTACK")
        with pytest.raises(SchemaMismatch):
            parse_netflow(p, CSV_SCHEMA)
        write_csv(p, [], header="SRC,DST,SPORT,PROTO,BYTES,PKTS,LABEL,ATTACK,EXTRA")
        with pytest.raises(SchemaMismatch):
            parse_netflow(p, CSV_SCHEMA)

    def test_malformed_row_reports_line(self, tmp_path):
        p = tmp_path / "flows.csv"
        write_csv(p, ["a,b,80,tcp,100,3,0,", "a,b,80,tcp,100,0"])
        with pytest.raises(MalformedRow) as err:
            parse_netflow(p, CSV_SCHEMA)
        assert err.value.line_number == 3

    def test_infinity_and_empty_marked_missing(self, tmp_path):
        p = tmp_path / "flows.csv"
        write_csv(p, ["a,b,80,tcp,Infinity,3,0,", "a,b,80,tcp,,junk,1,dos"])
        table = parse_netflow(p, CSV_SCHEMA)
        assert np.isnan(table.columns["BYTES"]).all()
        assert np.isnan(table.columns["PKTS"][1])

    def test_bad_label(self, tmp_path):
        p = tmp_path / "flows.csv"
        write_csv(p, ["a,b,80,tcp,1,1,2,"])
        with pytest.raises(MalformedRow):
            parse_netflow(p, CSV_SCHEMA)

    def test_empty_endpoint(self, tmp_path):
        p = tmp_path / "flows.csv"
        write_csv(p, ["a,,80,tcp,1,1,0,"])
        with pytest.raises(MalformedRow):
            parse_netflow(p, CSV_SCHEMA)

    def test_schema_requires_two_endpoints(self):
        with pytest.raises(InvalidConfig):
            Schema(columns={"SRC": "endpoint", "LABEL": "label"})
        with pytest.raises(InvalidConfig):
            Schema(columns={"SRC": "endpoint", "DST": "endpoint", "X": "numeric"})

    def test_load_schema_yaml(self, tmp_path):
        p = tmp_path / "schema.yaml"
        p.write_text("columns:\n  SRC: endpoint\n  DST: endpoint\n  LABEL: label\n")
        schema = load_schema(p)
        assert schema.src_column == "SRC" and schema.label_column == "LABEL"


class TestDownsample:
    def _table(self, n_benign, n_attack):
        labels = [0] * n_benign + [1] * n_attack
        return make_table(["h"] * len(labels), ["g"] * len(labels), labels)

    def test_stratified_counts(self):
        table = self._table(960, 40)
        out = downsample(table, 0.10, seed=7)
        assert out.n_rows == 100
        assert int(out.labels.sum()) == 4
        assert int((out.labels == 0).sum()) == 96

    def test_identity_at_full_fraction(self):
        table = self._table(10, 2)
        out = downsample(table, 1.0, seed=3)
        assert np.array_equal(out.row_ids, table.row_ids)
        assert np.array_equal(out.labels, table.labels)

    def test_deterministic(self):
        table = self._table(500, 50)
        a = downsample(table, 0.2, seed=11)
        b = downsample(table, 0.2, seed=11)
        assert np.array_equal(a.row_ids, b.row_ids)

    def test_empty_and_bad_fraction(self):
        with pytest.raises(EmptyTable):
            downsample(self._table(0, 0), 0.5, seed=0)
        with pytest.raises(InvalidConfig):
            downsample(self._table(5, 0), 0.0, seed=0)

    @given(st.integers(20, 300), st.integers(0, 40),
           st.floats(0.05, 1.0), st.integers(0, 10))
    @settings(max_examples=25, deadline=None)
    def test_class_proportion_within_one(self, n_benign, n_attack, fraction, seed):
        table = self._table(n_benign, n_attack)
        out = downsample(table, fraction, seed)
        n = table.n_rows
        assert out.n_rows == math.ceil(fraction * n)
        kept_attack = int(out.labels.sum())
        assert abs(kept_attack - fraction * n_attack) <= 1
        # original relative order preserved
        assert np.all(np.diff(out.row_ids) > 0)


class TestSplit:
    def test_zero_contamination_assignment(self):
        table = make_table(["h"] * 100, ["g"] * 100, [0] * 96 + [1] * 4)
        train, test = split_scenario(
            table, ScenarioSpec(train_fraction=0.7, contamination=0.0, seed=1)
        )
        assert train.n_rows == 70
        assert int(train.labels.sum()) == 0
        assert test.n_rows == 30
        assert int(test.labels.sum()) == 4
        assert int((test.labels == 0).sum()) == 26

    def test_contaminated_count_exact(self):
        table = make_table(["h"] * 200, ["g"] * 200, [0] * 180 + [1] * 20)
        train, test = split_scenario(
            table, ScenarioSpec(train_fraction=0.5, contamination=0.04, seed=2)
        )
        assert train.n_rows == 100
        assert int(train.labels.sum()) == math.ceil(0.04 * 100) == 4

    def test_insufficient_attacks(self):
        table = make_table(["h"] * 20, ["g"] * 20, [0] * 16 + [1] * 4)
        with pytest.raises(InsufficientAttacks) as err:
            split_scenario(table, ScenarioSpec(train_fraction=0.5,
                                               contamination=0.5, seed=0))
        assert err.value.achievable == pytest.approx(4 / 10)

    def test_split_partition(self):
        table = make_table(["h"] * 50, ["g"] * 50, [0] * 45 + [1] * 5)
        train, test = split_scenario(
            table, ScenarioSpec(train_fraction=0.6, contamination=0.04, seed=5)
        )
        merged = sorted(train.row_ids.tolist() + test.row_ids.tolist())
        assert merged == list(range(50))

    def test_scenario_validation(self):
        with pytest.raises(InvalidConfig):
            ScenarioSpec(downsample_fraction=0.0)
        with pytest.raises(InvalidConfig):
            ScenarioSpec(train_fraction=1.0)
        with pytest.raises(InvalidConfig):
            ScenarioSpec(contamination=1.0)


class TestTargetEncoding:
    def _table(self, cats, labels):
        return make_table(["h"] * len(cats), ["g"] * len(cats), labels,
                          numerics=[[1.0, 1.0]] * len(cats), cats=cats)

    def test_unsmoothed_means(self):
        table = self._table(["A", "A", "B"], [1, 0, 0])
        enc = TargetEncoder(smoothing=0.0).fit(table)
        assert enc.mappings_["PROTO"]["A"] == pytest.approx(0.5)
        assert enc.mappings_["PROTO"]["B"] == pytest.approx(0.0)

    def test_smoothed_means(self):
        # (count*mean + m*prior) / (count + m), prior = 1/3, m = 10
        table = self._table(["A", "A", "B"], [1, 0, 0])
        enc = TargetEncoder(smoothing=10.0).fit(table)
        prior = 1 / 3
        assert enc.mappings_["PROTO"]["A"] == pytest.approx(
            (2 * 0.5 + 10 * prior) / 12
        )
        assert enc.mappings_["PROTO"]["B"] == pytest.approx((10 * prior) / 11)

    def test_unseen_category_maps_to_prior(self):
        train = self._table(["A", "A", "B"], [1, 0, 0])
        enc = fit_target_encoding(train)
        other = self._table(["Z", "A", "Z"], [0, 0, 0])
        out = enc.transform(other)
        assert out.columns["PROTO"][0] == pytest.approx(enc.prior_)
        assert out.encoded

    def test_all_benign_encodes_to_zero(self):
        train = self._table(["A", "B", "B"], [0, 0, 0])
        enc = fit_target_encoding(train)
        assert all(v == 0.0 for v in enc.mappings_["PROTO"].values())

    def test_no_categoricals_warns(self):
        schema = simple_schema(n_numeric=1, categoricals=())
        table = make_table(["h"], ["g"], [0], numerics=[[1.0]], schema=schema)
        with pytest.warns(NoCategoricalsWarning):
            TargetEncoder().fit(table)

    def test_frequency_encoder_label_free(self):
        train = self._table(["A", "A", "B", "C"], [1, 1, 1, 1])
        enc = FrequencyEncoder().fit(train)
        assert enc.mappings_["PROTO"]["A"] == pytest.approx(0.5)
        out = enc.transform(self._table(["Z"], [0]))
        assert out.columns["PROTO"][0] == 0.0


class TestNormalize:
    def test_train_fitted_column_scaling(self):
        schema = simple_schema(n_numeric=1, categoricals=())
        train = make_table(["a", "b"], ["b", "a"], [0, 0],
                           numerics=[[3.0], [4.0]], schema=schema)
        test = make_table(["a"], ["b"], [1], numerics=[[5.0]], schema=schema)
        train2, test2, params = sanitize_and_normalize(train, test)
        np.testing.assert_allclose(train2.columns["F0"], [0.6, 0.8])
        np.testing.assert_allclose(test2.columns["F0"], [1.0])
        assert params["column_scales"]["F0"] == pytest.approx(5.0)

    def test_zero_column_left_as_zeros(self):
        schema = simple_schema(n_numeric=1, categoricals=())
        train = make_table(["a"], ["b"], [0], numerics=[[0.0]], schema=schema)
        test = make_table(["a"], ["b"], [0], numerics=[[0.0]], schema=schema)
        train2, _, params = sanitize_and_normalize(train, test)
        assert train2.columns["F0"][0] == 0.0
        assert params["column_scales"]["F0"] == 0.0

    def test_infinity_zeroed_before_fitting(self):
        schema = simple_schema(n_numeric=1, categoricals=())
        train = make_table(["a", "b", "c"], ["b", "c", "a"], [0, 0, 0],
                           numerics=[[3.0], [4.0], [np.inf]], schema=schema)
        test = make_table(["a"], ["b"], [0], numerics=[[np.nan]], schema=schema)
        train2, test2, params = sanitize_and_normalize(train, test)
        assert params["column_scales"]["F0"] == pytest.approx(5.0)
        assert test2.columns["F0"][0] == 0.0

    def test_dimension_mismatch(self):
        s1 = simple_schema(n_numeric=1, categoricals=())
        s2 = simple_schema(n_numeric=2, categoricals=())
        train = make_table(["a"], ["b"], [0], numerics=[[1.0]], schema=s1)
        test = make_table(["a"], ["b"], [0], numerics=[[1.0, 2.0]], schema=s2)
        with pytest.raises(DimensionMismatch):
            sanitize_and_normalize(train, test)

    @given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 5))
    @settings(max_examples=20, deadline=None)
    def test_train_columns_unit_or_zero_norm(self, n, d, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d)) * rng.choice([0.0, 1.0, 100.0], size=d)
        scaler = ColumnL2Scaler().fit(X)
        out = scaler.transform(X)
        norms = np.linalg.norm(out, axis=0)
        assert np.all((np.abs(norms - 1) < 1e-9) | (norms < 1e-9))

    def test_row_permutation_equivariance(self):
        rng = np.random.default_rng(0)
        cats = list(rng.choice(["A", "B", "C"], size=20))
        labels = list(rng.integers(0, 2, size=20))
        nums = rng.normal(size=(20, 2)).tolist()
        table = make_table(["h"] * 20, ["g"] * 20, labels, numerics=nums, cats=cats)
        perm = rng.permutation(20)
        permuted = table.take(perm)
        enc = TargetEncoder().fit(table)
        out_a = enc.transform(table)
        out_b = enc.transform(permuted)
        np.testing.assert_array_equal(out_a.columns["PROTO"][perm],
                                      out_b.columns["PROTO"])
