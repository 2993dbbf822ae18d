import numpy as np
import pytest

from flowscat.errors import InvalidConfig, LengthExceedsT
from flowscat.graph import build_graph
from flowscat.scattering import (
    ScatteringConfig,
    ScatteringTransform,
    augment_edges,
    build_filterbank,
    default_pad_length,
    dump_coefficients,
    scatter,
    scatter_batch,
)

from conftest import make_table, simple_schema


class TestConfig:
    def test_t_below_scale_rejected(self):
        with pytest.raises(InvalidConfig):
            ScatteringConfig(J=4, Q=1, T=8)

    def test_t_power_of_two_required(self):
        with pytest.raises(InvalidConfig):
            ScatteringConfig(J=2, Q=1, T=12)

    def test_default_pad_length(self):
        assert default_pad_length(4, 39) == 64
        assert default_pad_length(4, 12) == 16
        assert default_pad_length(2, 100) == 128


class TestFilterBank:
    def test_minimal_config_path_enumeration(self):
        # J=1, Q=1, T=4: one usable first-order filter, no second-order
        # path with a lower center frequency, so exactly two paths
        bank = build_filterbank(ScatteringConfig(J=1, Q=1, T=4))
        assert bank.n_paths == 2
        assert len(bank.psi1) == 1
        orders = [p.order for p in bank.paths]
        assert orders == [0, 1]

    def test_second_order_requires_lower_frequency(self, reference_bank):
        for p in reference_bank.paths:
            if p.order == 2:
                assert reference_bank.xi2[p.lam2] < reference_bank.xi1[p.lam1]

    def test_path_enumeration_order(self, reference_bank):
        orders = [p.order for p in reference_bank.paths]
        assert orders == sorted(orders)
        second = [(p.lam1, p.lam2) for p in reference_bank.paths if p.order == 2]
        assert second == sorted(second)

    def test_deterministic_build(self):
        cfg = ScatteringConfig(J=3, Q=4, T=32)
        a = build_filterbank(cfg)
        b = build_filterbank(cfg)
        np.testing.assert_array_equal(a.phi, b.phi)
        for pa, pb in zip(a.psi1, b.psi1):
            np.testing.assert_array_equal(pa, pb)
        assert a.paths == b.paths

    def test_littlewood_paley_bound(self, reference_bank):
        assert reference_bank.littlewood_paley().max() <= 1.0 + 1e-6
        small = build_filterbank(ScatteringConfig(J=2, Q=2, T=16))
        assert small.littlewood_paley().max() <= 1.0 + 1e-6

    def test_bandpass_kills_dc(self, reference_bank):
        for psi in reference_bank.psi1 + reference_bank.psi2:
            assert abs(psi[0]) == 0.0


class TestScatter:
    def test_zero_vector(self, reference_bank):
        out = scatter(reference_bank, np.zeros(39))
        assert out.shape == (reference_bank.n_paths,)
        np.testing.assert_array_equal(out, 0.0)

    def test_homogeneity(self, reference_bank):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(20, 39))
        S = scatter_batch(reference_bank, X)
        for a in (-2.0, 0.5, 3.0):
            Sa = scatter_batch(reference_bank, a * X)
            assert np.max(np.abs(Sa - abs(a) * S)) <= 1e-9

    def test_nonnegative_coefficients(self, reference_bank):
        rng = np.random.default_rng(6)
        S = scatter_batch(reference_bank, rng.normal(size=(10, 39)))
        assert np.all(S >= 0.0)

    def test_constant_vector_concentrates_at_order_zero(self, reference_bank):
        c = -3.7
        out = scatter(reference_bank, c * np.ones(64))
        n1 = len(reference_bank.psi1)
        assert out[0] > 0.0
        assert np.max(out[1:1 + n1]) <= 1e-6 * abs(c)

    def test_non_expansive(self, reference_bank):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(50, 39))
        Y = rng.normal(size=(50, 39))
        SX = scatter_batch(reference_bank, X)
        SY = scatter_batch(reference_bank, Y)
        lhs = np.linalg.norm(SX - SY, axis=1)
        rhs = np.linalg.norm(X - Y, axis=1)
        assert np.all(lhs <= rhs + 1e-6)

    def test_translation_stability_full_length(self, reference_bank):
        # circular shift on the padded circle (L == T): global averaging
        # makes the coefficients shift-stable well inside the 5% bound
        rng = np.random.default_rng(8)
        kernel = np.ones(7) / 7
        for _ in range(10):
            x = np.convolve(rng.normal(size=64), kernel, mode="same")
            s0 = scatter(reference_bank, x)
            for tau in (1, 2):
                s_tau = scatter(reference_bank, np.roll(x, tau))
                assert (np.linalg.norm(s0 - s_tau)
                        <= 0.05 * np.linalg.norm(s0))

    def test_translation_stability_embedded(self, reference_bank):
        # shifting content inside the zero-padded frame moves the seam,
        # so only a looser stability bound applies
        rng = np.random.default_rng(8)
        kernel = np.ones(7) / 7
        for _ in range(10):
            x = np.convolve(rng.normal(size=39), kernel, mode="same")
            s0 = scatter(reference_bank, x)
            for tau in (1, 2):
                s_tau = scatter(reference_bank, np.roll(x, tau))
                assert (np.linalg.norm(s0 - s_tau)
                        <= 0.35 * np.linalg.norm(s0))

    def test_length_guard(self, reference_bank):
        with pytest.raises(LengthExceedsT):
            scatter(reference_bank, np.zeros(65))

    def test_coefficient_count_is_config_function(self, reference_bank):
        rng = np.random.default_rng(9)
        for length in (1, 5, 39, 64):
            out = scatter(reference_bank, rng.normal(size=length))
            assert out.shape == (reference_bank.n_paths,)


class TestAugment:
    def _graph(self, features):
        schema = simple_schema(n_numeric=len(features[0]), categoricals=())
        table = make_table(["a"] * len(features), ["b"] * len(features),
                           [0] * len(features), numerics=features, schema=schema)
        return build_graph(table)

    def test_dimension_is_original_plus_paths(self, reference_bank):
        g = self._graph([[0.5, 0.1, 0.2], [0.9, 0.0, 0.4]])
        out = augment_edges(g, reference_bank)
        assert out.feature_dim == 3 + reference_bank.n_paths

    def test_zero_features_append_zeros(self, reference_bank):
        g = self._graph([[0.0, 0.0]])
        out = augment_edges(g, reference_bank)
        np.testing.assert_array_equal(out.flow_features[0, 2:], 0.0)

    def test_identical_rows_identical_augmentation(self, reference_bank):
        g = self._graph([[0.3, 0.7], [0.3, 0.7]])
        out = augment_edges(g, reference_bank)
        np.testing.assert_array_equal(out.flow_features[0], out.flow_features[1])

    def test_forward_and_reverse_share_augmented_vector(self, reference_bank):
        g = self._graph([[0.3, 0.7]])
        out = augment_edges(g, reference_bank)
        np.testing.assert_array_equal(out.edge_features(0), out.edge_features(1))


def test_dump_coefficients(tmp_path, reference_bank):
    coeffs = scatter_batch(reference_bank, np.ones((2, 10)))
    path = tmp_path / "coeffs.csv"
    dump_coefficients(reference_bank, coeffs, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("S0,S1[0],")
    assert len(lines) == 3


def test_estimator_wrapper():
    est = ScatteringTransform(J=2, Q=2)
    X = np.random.default_rng(0).normal(size=(4, 10))
    out = est.fit(X).transform(X)
    assert est.bank_.config.T == default_pad_length(2, 10)
    assert out.shape == (4, est.bank_.n_paths)
    assert est.get_params()["J"] == 2
