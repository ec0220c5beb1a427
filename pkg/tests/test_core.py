import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gem.core import fit_gem, gem, load_fit, save_fit, variance_summary
from gem.design import CodedDesign, build_design, parse_formula
from gem.oracle import Covariate, PlantedEffect, cell_means_rows, ols_oracle, rng

from conftest import drop_rows, synth

FULL = "y ~ f1 + f2 + f1:f2"


def test_toy_group_means(toy_dataset):
    fit = gem("y ~ g", toy_dataset)
    assert fit.mu[0] == pytest.approx(2.0, abs=1e-14)
    assert fit.beta[fit.term("g")][0, 0] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(fit.effect("g")[:, 0], [-1, -1, 1, 1], atol=1e-14)
    assert np.allclose(fit.R, 0, atol=1e-14)


def test_pure_planted_effect_recovered_exactly():
    d = synth(levels=(2, 2), reps=3, N=5, noise_sd=0.0, effects=[PlantedEffect("f1", 2.0, range(5))]).data
    fit = gem(FULL, d)
    x1 = fit.design.block("f1")[:, 0]
    assert np.allclose(fit.effect("f1"), 2.0 * x1[:, None], atol=1e-12)
    assert np.allclose(fit.effect("f2"), 0, atol=1e-12)
    assert np.allclose(fit.effect("f1:f2"), 0, atol=1e-12)
    assert np.allclose(fit.R, 0, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("unbalanced", [False, True])
def test_identity_and_residual_orthogonality(seed, unbalanced):
    d = synth(levels=(2, 3), reps=4, N=30, seed=seed, covariates=[Covariate("age", 20, 60)]).data
    if unbalanced:
        d = drop_rows(d, [0, 5])
    fit = gem(FULL + " + age", d)
    assert np.max(np.abs(d.Y - fit.reconstruct())) <= 1e-10
    X = fit.design.X
    rel = np.max(np.abs(X.T @ fit.R)) / (np.linalg.norm(X) * np.linalg.norm(fit.R))
    assert rel <= 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_beta_matches_ols_oracle_unbalanced(seed):
    d = drop_rows(synth(levels=(3, 2), reps=3, N=10, seed=seed).data, [1, 8])
    fit = gem(FULL, d)
    B = ols_oracle(fit.design.X, d.Y)
    mine = np.vstack([fit.mu[None]] + [fit.beta[t] for t in fit.terms])
    assert np.max(np.abs(mine - B)) <= 1e-8


@pytest.mark.parametrize("levels", [(2, 2), (3, 4), (2, 5)])
def test_main_effects_are_cell_mean_deviations(levels):
    d = synth(levels=levels, reps=2, N=8, seed=4).data
    fit = gem(FULL, d)
    for f in ("f1", "f2"):
        assert np.max(np.abs(fit.effect(f) - cell_means_rows(d, f))) <= 1e-10


def test_balanced_effects_orthogonal():
    d = synth(levels=(3, 3), reps=2, N=15, seed=2).data
    fit = gem(FULL, d)
    mats = list(fit.effects.values()) + [fit.R]
    scale = max(np.linalg.norm(M) for M in mats) ** 2
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            assert np.max(np.abs(mats[i].T @ mats[j])) <= 1e-8 * scale


@pytest.mark.parametrize("seed", range(4))
def test_recoding_blocks_leaves_effects_unchanged(seed):
    d = synth(levels=(3, 4), reps=2, N=6, seed=seed).data
    design = build_design(parse_formula(FULL), d)
    g = rng(seed)
    X = design.X.copy()
    for s in design.blocks.values():
        k = s.stop - s.start
        M = g.standard_normal((k, k)) + 3 * np.eye(k)
        X[:, s] = X[:, s] @ M
    other = CodedDesign(X=X, spec=design.spec, blocks=design.blocks, codings=design.codings)
    a, b = fit_gem(design, d.Y), fit_gem(other, d.Y)
    for t in design.terms:
        assert np.max(np.abs(a.effects[t] - b.effects[t])) <= 1e-9
    assert np.max(np.abs(a.R - b.R)) <= 1e-9


def test_row_permutation_is_equivariant():
    d = synth(levels=(2, 3), reps=3, N=7, seed=8, covariates=[Covariate("age", 0, 1)]).data
    perm = rng(1).permutation(d.n)
    a, b = gem(FULL + " + age", d), gem(FULL + " + age", d.subset(perm))
    for t in a.terms:
        assert np.allclose(a.effect(t)[perm], b.effect(t), atol=1e-10)
    assert np.allclose(a.mu, b.mu, atol=1e-12)


def test_er_and_combined_er(two_factor):
    fit = gem(FULL + " + age", two_factor.data)
    assert np.array_equal(fit.er("f1"), fit.effect("f1") + fit.R)
    comb = fit.combined_er(["f1", "f1:f2"])
    assert np.allclose(comb, fit.effect("f1") + fit.effect("f1:f2") + fit.R)
    assert np.array_equal(fit.combined_er(["f2:f1"]), fit.er("f1:f2"))
    with pytest.raises(KeyError, match="unknown term"):
        fit.er("nope")


def test_variance_shares_sum_to_one_when_balanced():
    fit = gem(FULL, synth(levels=(2, 3), reps=3, N=10, seed=3).data)
    assert sum(variance_summary(fit).values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("embed", [False, True])
def test_json_round_trip(tmp_path, two_factor, embed):
    d = two_factor.data
    fit = gem(FULL + " + age", d)
    save_fit(fit, tmp_path / "f.json", embed_matrices=embed)
    back = load_fit(tmp_path / "f.json", None if embed else d)
    for t in fit.terms:
        assert np.max(np.abs(back.beta[back.term(t)] - fit.beta[t])) <= 1e-12
        assert np.max(np.abs(back.er(t) - fit.er(t))) <= 1e-12
    assert np.max(np.abs(back.mu - fit.mu)) <= 1e-12


def test_load_without_data_or_matrices_fails(tmp_path, two_factor):
    save_fit(gem("y ~ f1", two_factor.data), tmp_path / "f.json")
    with pytest.raises(ValueError, match="pass the dataset"):
        load_fit(tmp_path / "f.json")


@given(st.integers(0, 10_000), st.sampled_from([(2, 2), (2, 3), (3, 3)]), st.integers(2, 3))
@settings(max_examples=25, deadline=None)
def test_decomposition_identity_property(seed, levels, reps):
    d = synth(levels=levels, reps=reps, N=6, seed=seed).data
    fit = gem(FULL, d)
    assert np.max(np.abs(d.Y - fit.reconstruct())) <= 1e-10


def test_three_level_means_give_centered_effect_rows():
    from gem.dataset import Dataset
    from gem.oracle import generate_balanced_design
    sk = generate_balanced_design([2, 3], 2)
    level = np.array([int(v[1:]) - 1 for v in sk.variables[1].values], dtype=float)
    d = Dataset(Y=level[:, None], response_names=("y",), sample_ids=tuple(f"s{i}" for i in range(12)),
                variables=sk.variables)
    fit = gem(FULL, d)
    assert np.allclose(fit.effect("f2")[:, 0], level - 1.0, atol=1e-12)
    assert np.allclose(fit.R, 0, atol=1e-12)
