import numpy as np
import pytest

from dagpop.errors import InvalidInput
from dagpop.graphs import EdgeIndexMap, StructureParams, assemble_W, n_structure_vars
from dagpop.polys import Monomial
from dagpop.scoring import (
    Dataset,
    ScoreConfig,
    fit_feature_degrees,
    lower_objective,
    ls_loss,
    numeric_loss,
    read_csv,
    upper_objective,
    write_csv,
)


def point(q, p):
    return np.concatenate([np.atleast_1d(q), np.atleast_1d(p)])


@pytest.fixture
def noiseless_pair():
    rng = np.random.default_rng(42)
    x0 = rng.normal(size=200)
    x1 = 0.8 * x0
    return np.column_stack([x0, x1])


class TestLsLoss:
    def test_zero_data(self):
        f = ls_loss(np.zeros((10, 2)), 2)
        assert f.is_zero()

    def test_noiseless_true_structure(self, noiseless_pair):
        f = ls_loss(noiseless_pair, 2)
        # Edge 0 -> 1 with refit weight 0.8: p = 0.8, q = 1. The mechanism
        # residual vanishes; only the root column's own variance remains.
        root_var = float(noiseless_pair[:, 0] @ noiseless_pair[:, 0]) / (
            2 * noiseless_pair.shape[0]
        )
        assert f.evaluate(point(1.0, 0.8)) == pytest.approx(root_var, abs=1e-10)
        # Masking the root column isolates the mechanism residual: exactly zero.
        masked = ls_loss(noiseless_pair, 2, mask_target=0)
        assert masked.evaluate(point(1.0, 0.8)) == pytest.approx(0.0, abs=1e-10)
        # The reversed direction cannot reach zero residual within the box.
        assert masked.evaluate(point(0.0, 1.0)) > 1e-3

    def test_masking_removes_target_terms(self, noiseless_pair):
        full = ls_loss(noiseless_pair, 2)
        masked = ls_loss(noiseless_pair, 2, mask_target=0)
        assert len(masked.terms) < len(full.terms)

    def test_matches_numeric_oracle(self):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(50, 3))
        f = ls_loss(data, 3)
        emap = EdgeIndexMap(3)
        for _ in range(10):
            q = rng.uniform(0, 1, 3)
            p = rng.uniform(-1, 1, 3)
            prm = StructureParams(q=q, p=p, lam=np.zeros(4))
            W = assemble_W(prm, 3)
            assert f.evaluate(point(q, p)) == pytest.approx(
                numeric_loss(data, W), rel=1e-9, abs=1e-12
            )

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(5)
        data = rng.normal(size=(40, 3))
        shuffled = data[rng.permutation(40)]
        f, g = ls_loss(data, 3), ls_loss(shuffled, 3)
        assert f.support() == g.support()
        for m in f.support():
            assert f.coeff(m) == pytest.approx(g.coeff(m), rel=1e-9, abs=1e-12)

    def test_degree_and_nonnegative(self):
        rng = np.random.default_rng(9)
        data = rng.normal(size=(30, 3))
        f = ls_loss(data, 3)
        assert f.degree() <= 4 and f.degree() % 2 == 0
        for _ in range(1000):
            pt = point(rng.uniform(0, 1, 3), rng.uniform(-1, 1, 3))
            assert f.evaluate(pt) >= -1e-12

    def test_empty_data_rejected(self):
        with pytest.raises(InvalidInput):
            ls_loss(np.zeros((0, 2)), 2)


class TestObjectives:
    def test_upper_zero_when_empty(self):
        ds = Dataset(obs=np.random.default_rng(0).normal(size=(10, 2)))
        F = upper_objective(ds, ScoreConfig(alpha=0.0))
        assert F.is_zero()

    def test_upper_additivity(self, noiseless_pair):
        ds = Dataset(obs=noiseless_pair, int_blocks=[(0, noiseless_pair)])
        cfg = ScoreConfig(alpha=1.0)
        F = upper_objective(ds, cfg)
        manual = ls_loss(noiseless_pair, 2, mask_target=0) + ls_loss(noiseless_pair, 2)
        assert F.support() == manual.support()
        for m in F.support():
            assert F.coeff(m) == pytest.approx(manual.coeff(m), rel=1e-9)

    def test_alpha_scales_observational_terms(self, noiseless_pair):
        ds = Dataset(obs=noiseless_pair)
        F1 = upper_objective(ds, ScoreConfig(alpha=1.0))
        F2 = upper_objective(ds, ScoreConfig(alpha=2.0))
        for m in F1.support():
            assert F2.coeff(m) == pytest.approx(2.0 * F1.coeff(m), rel=1e-9)

    def test_lower_without_penalty(self, noiseless_pair):
        ds = Dataset(obs=noiseless_pair)
        G = lower_objective(ds, ScoreConfig(lambda_sp=0.0))
        assert G.support() == ls_loss(noiseless_pair, 2).support()

    def test_lower_pure_penalty_on_zero_data(self):
        ds = Dataset(obs=np.zeros((5, 3)))
        G = lower_objective(ds, ScoreConfig(lambda_sp=1.0))
        nv = n_structure_vars(3)
        assert len(G.terms) == 3
        for e in range(3):
            assert G.coeff(Monomial.variable(3 + e, 2)) == pytest.approx(1.0)

    def test_lower_gradient_finite_difference(self, noiseless_pair):
        ds = Dataset(obs=noiseless_pair)
        G = lower_objective(ds, ScoreConfig(lambda_sp=0.5))
        rng = np.random.default_rng(2)
        h = 1e-5
        for _ in range(5):
            pt = point(rng.uniform(0, 1, 1), rng.uniform(-1, 1, 1))
            for v in range(2):
                up, dn = pt.copy(), pt.copy()
                up[v] += h
                dn[v] -= h
                fd = (G.evaluate(up) - G.evaluate(dn)) / (2 * h)
                assert G.grad(v).evaluate(pt) == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestFeatures:
    def test_linear_mode_all_ones(self):
        ds = Dataset(obs=np.random.default_rng(0).normal(size=(20, 3)))
        assert np.all(fit_feature_degrees(ds, ScoreConfig()) == 1)

    def test_cubic_mechanism_detected(self):
        rng = np.random.default_rng(8)
        x0 = rng.normal(size=400)
        x1 = 0.8 * x0 ** 3 + 0.05 * rng.normal(size=400)
        ds = Dataset(obs=np.column_stack([x0, x1]))
        deg = fit_feature_degrees(ds, ScoreConfig(feature_mode="per-pair-monomial"))
        assert deg[0, 1] == 3

    def test_cubic_mechanism_residual_reaches_zero(self):
        rng = np.random.default_rng(12)
        x0 = rng.normal(size=300)
        x1 = 0.8 * x0 ** 3
        data = np.column_stack([x0, x1])
        ds = Dataset(obs=data)
        deg = fit_feature_degrees(ds, ScoreConfig(feature_mode="per-pair-monomial"))
        f = ls_loss(data, 2, degrees=deg, mask_target=0)
        assert f.evaluate(point(1.0, 0.8)) == pytest.approx(0.0, abs=1e-9)


class TestDatasetValidation:
    def test_duplicate_target_rejected(self):
        obs = np.zeros((5, 2))
        with pytest.raises(InvalidInput):
            Dataset(obs=obs, int_blocks=[(0, obs), (0, obs)])

    def test_bad_target_rejected(self):
        obs = np.zeros((5, 2))
        with pytest.raises(InvalidInput):
            Dataset(obs=obs, int_blocks=[(5, obs)])

    def test_column_mismatch_rejected(self):
        with pytest.raises(InvalidInput):
            Dataset(obs=np.zeros((5, 2)), int_blocks=[(0, np.zeros((5, 3)))])


class TestCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        ds = Dataset(
            obs=rng.normal(size=(7, 3)),
            int_blocks=[(1, rng.normal(size=(4, 3))), (2, rng.normal(size=(5, 3)))],
        )
        path = tmp_path / "data.csv"
        write_csv(path, ds)
        back = read_csv(path)
        assert np.array_equal(back.obs, ds.obs)
        assert len(back.int_blocks) == 2
        for (t1, b1), (t2, b2) in zip(back.int_blocks, ds.int_blocks):
            assert t1 == t2 and np.array_equal(b1, b2)
