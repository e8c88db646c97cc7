import numpy as np
import pytest

from decaykit import breeding as bs
from decaykit import elastic_net as en
from decaykit.errors import ValidationError
from decaykit.geno import MarkerMatrix, PhenotypeVector
from decaykit.synthetic import panmictic

from conftest import make_matrix


@pytest.fixture(scope="module")
def founders():
    m = panmictic(60, 300, seed=3)
    gmap = bs.GeneticMap.uniform(m.n_markers, 5)
    return bs.phase_founders(m, gmap, seed=1), m


def test_phase_homozygotes_and_reconstruction():
    g = np.array([[0, 2, 1], [1, 1, 2]], dtype=float)
    pop = bs.phase_founders(g, bs.GeneticMap.uniform(3, 1), seed=0)
    h = pop.haplotypes
    assert tuple(h[0, :, 0]) == (0, 0)
    assert tuple(h[0, :, 1]) == (1, 1)
    np.testing.assert_array_equal(pop.genotypes(), g)


def test_phase_rejects_missing():
    with pytest.raises(ValidationError):
        bs.phase_founders(np.array([[np.nan, 1.0]]), bs.GeneticMap.uniform(2, 1))


def test_homozygous_parent_gamete():
    gmap = bs.GeneticMap.uniform(50, 2, length=3.0)
    parent = np.tile(np.arange(50) % 2, (2, 1)).astype(np.uint8)
    for s in range(5):
        np.testing.assert_array_equal(bs.make_gamete(parent, gmap, seed=s), parent[0])


def test_zero_crossovers_keep_one_strand():
    gmap = bs.GeneticMap(np.zeros(20, dtype=int), np.linspace(0.01, 0.2, 20), length=0.0)
    parent = np.stack([np.zeros(20), np.ones(20)]).astype(np.uint8)
    for s in range(10):
        g = bs.make_gamete(parent, gmap, seed=s)
        assert g.min() == g.max()


def test_recombination_fraction_matches_haldane():
    n = 11
    gmap = bs.GeneticMap(np.zeros(n, dtype=int), np.linspace(0.0, 1.0, n), length=1.0)
    parents = np.repeat(np.stack([np.zeros(n), np.ones(n)])[None], 10_000, axis=0).astype(np.uint8)
    gam = bs.make_gametes(parents, gmap, np.random.default_rng(0))
    frac = (np.diff(gam.astype(int), axis=1) != 0).mean(axis=0)
    expected = 0.5 * (1 - np.exp(-2 * 0.1))
    assert np.all(np.abs(frac - expected) <= 0.2 * expected)


def test_unlinked_chromosomes_segregate_independently():
    gmap = bs.GeneticMap.uniform(2, 2)
    parents = np.repeat(np.array([[[0, 0], [1, 1]]], dtype=np.uint8), 10_000, axis=0)
    gam = bs.make_gametes(parents, gmap, np.random.default_rng(1))
    assert abs((gam[:, 0] != gam[:, 1]).mean() - 0.5) < 0.02


def test_random_mate_homozygous_parents():
    gmap = bs.GeneticMap.uniform(4, 1)
    pop = bs.HaplotypePopulation(np.ones((5, 2, 4), dtype=np.uint8), gmap)
    kids = bs.random_mate(pop, 200, seed=0)
    assert kids.size == 200
    assert np.all(kids.genotypes() == 2)


def test_random_mate_drift_within_binomial_bounds(founders):
    pop, _ = founders
    kids = bs.random_mate(pop, 200, seed=5)
    p0 = pop.genotypes().mean(axis=0) / 2
    p1 = kids.genotypes().mean(axis=0) / 2
    se = np.sqrt(p0 * (1 - p0) / (2 * 200))
    ok = np.abs(p1 - p0) <= 3 * se + 1e-12
    # pairs of parents add a little variance beyond pure gamete sampling
    assert ok.mean() >= 0.97


def test_zero_effects_pure_noise(founders):
    _, m = founders
    arch = bs.TraitArchitecture(np.array([0, 1]), np.zeros(2))
    y = bs.simulate_phenotypes(m, arch, seed=2)
    assert np.var(y.values, ddof=1) == pytest.approx(1.0, abs=0.4)
    big = np.zeros((5000, 2))
    assert np.var(bs.simulate_phenotypes(big, arch, seed=3).values) == pytest.approx(1.0, abs=0.05)


def test_single_causal_linearity(founders):
    _, m = founders
    arch = bs.TraitArchitecture(np.array([7]), np.array([1.5]), sigma_e=1.0)
    y1 = bs.simulate_phenotypes(m, arch, seed=4)
    noise = y1.values - 1.5 * m.counts[:, 7]
    zero = bs.TraitArchitecture(np.array([7]), np.array([0.0]), sigma_e=1.0)
    np.testing.assert_allclose(noise, bs.simulate_phenotypes(m, zero, seed=4).values, atol=1e-12)


def test_founder_heritability():
    realised = []
    for seed in range(20):
        m = panmictic(200, 1000, seed=seed)
        arch = bs.make_architecture(m, 50, 0.55, seed=seed)
        g = bs.genetic_values(m, arch)
        assert np.var(g, ddof=1) / (np.var(g, ddof=1) + 1.0) == pytest.approx(0.55, abs=1e-12)
        p = m.counts[:, arch.causal_indices].mean(0) / 2
        assert np.all(np.minimum(p, 1 - p) > 0.05)
        y = bs.simulate_phenotypes(m, arch, seed=seed)
        realised.append(np.var(g, ddof=1) / np.var(y.values, ddof=1))
    assert 0.50 <= np.mean(realised) <= 0.60


def test_architecture_rejects_h2_one(founders):
    with pytest.raises(ValidationError):
        bs.make_architecture(founders[1], 5, 1.0)


def _model(m, arch, seed=0):
    y = bs.simulate_phenotypes(m, arch, seed=seed)
    return en.fit(m, y, 0.5, 0.05)


def test_selection_shapes_and_determinism(founders):
    pop, m = founders
    arch = bs.make_architecture(m, 10, 0.55, seed=0)
    model = _model(m, arch)
    a = bs.run_selection_program(pop, arch, model, n_rounds=10, n_progeny=40, n_selected=10, n_sims=3, seed=1)
    b = bs.run_selection_program(pop, arch, model, n_rounds=10, n_progeny=40, n_selected=10, n_sims=3, seed=1,
                                 threads=2)
    assert len(a.records) == 3 * 10
    assert [r.generation for r in a.rounds] == list(range(1, 11))
    assert a.rounds == b.rounds and a.records == b.records


def test_selection_raises_favourable_allele():
    m = panmictic(60, 50, seed=7)
    pop = bs.phase_founders(m, bs.GeneticMap.uniform(50, 5), seed=0)
    j = int(np.argmin(np.abs(m.counts.mean(0) / 2 - 0.4)))
    arch = bs.TraitArchitecture(np.array([j]), np.array([1.0]), sigma_e=0.01, h2_target=0.9999)
    model = _model(m, arch)
    res = bs.run_selection_program(pop, arch, model, n_rounds=5, n_progeny=60, n_selected=10, n_sims=4, seed=3)
    g = [r.mean_genetic_value for r in res.rounds]
    assert all(b >= a - 1e-12 for a, b in zip(g, g[1:]))


def test_fst_grows_over_generations(founders):
    pop, m = founders
    arch = bs.make_architecture(m, 20, 0.55, seed=2)
    res = bs.run_selection_program(pop, arch, _model(m, arch), n_rounds=5, n_progeny=60, n_selected=10,
                                   n_sims=5, seed=0)
    f = [r.mean_fst for r in res.rounds]
    assert all(b >= a for a, b in zip(f, f[1:]))


def test_selection_csv(tmp_path, founders):
    pop, m = founders
    arch = bs.make_architecture(m, 5, 0.55, seed=2)
    res = bs.run_selection_program(pop, arch, _model(m, arch), n_rounds=2, n_progeny=20, n_selected=4,
                                   n_sims=2, seed=0)
    res.write_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "sim,generation,fst,rho,mean_g" and len(lines) == 5


def test_augment_training_sizes(founders):
    pop, m = founders
    arch = bs.make_architecture(m, 10, 0.55, seed=0)
    y = bs.simulate_phenotypes(m, arch, seed=0)
    res = bs.run_selection_program(pop, arch, _model(m, arch), n_rounds=3, n_progeny=60, n_selected=10,
                                   n_sims=1, seed=0, keep_generations=3, marker_ids=m.marker_ids)
    aug_m, aug_y = bs.augment_training(m, y, res.kept)
    assert aug_m.n_individuals == 60 + 3 * 60 == len(aug_y)
    same_m, same_y = bs.augment_training(m, y, [])
    np.testing.assert_array_equal(same_m.counts, m.counts)
    with pytest.raises(ValidationError):
        bs.augment_training(m, y, [(m, y)])


def test_full_scale_augmented_count():
    m = make_matrix(np.random.default_rng(0).binomial(2, 0.5, (200, 30)))
    y = PhenotypeVector(np.zeros(200), "t", m.individual_ids)
    gens = []
    for g in range(3):
        ids = [f"g{g}i{i}" for i in range(200)]
        gens.append((MarkerMatrix(m.counts, m.marker_ids, ids), PhenotypeVector(np.zeros(200), "t", ids)))
    assert bs.augment_training(m, y, gens)[0].n_individuals == 800


def test_augmented_model_beats_later_generations():
    m = panmictic(100, 400, seed=11)
    pop = bs.phase_founders(m, bs.GeneticMap.uniform(400, 5), seed=0)
    arch = bs.make_architecture(m, 20, 0.55, seed=1)
    y = bs.simulate_phenotypes(m, arch, seed=2)
    model = en.fit(m, y, 0.5, 0.05)
    res = bs.run_selection_program(pop, arch, model, n_rounds=5, n_progeny=100, n_selected=20, n_sims=4,
                                   seed=3, keep_generations=2, marker_ids=m.marker_ids)
    aug_m, aug_y = bs.augment_training(m, y, res.kept)
    refit = en.fit(aug_m, aug_y, 0.5, 0.05)
    rho_founders = en.predictive_correlation(y.values, en.predict(refit, m))
    late = np.nanmean([r.mean_rho for r in res.rounds[2:]])
    assert rho_founders >= late


def test_crosspop_shared_architecture():
    m = panmictic(200, 300, seed=5)
    ys = bs.crosspop_simulate([m, m], 20, 0.55, seed=1)
    assert np.var(ys[0].values) == pytest.approx(np.var(ys[1].values), rel=0.3)
    assert np.mean(ys[0].values) == pytest.approx(np.mean(ys[1].values), abs=0.3)


def test_crosspop_training_heritability():
    m = panmictic(400, 500, seed=6)
    y = bs.crosspop_simulate([m], 30, 0.55, seed=2)[0]
    arch = bs.make_architecture(m, 30, 0.55, 1.0, bs.stream(2, "crosspop-architecture"))
    g = bs.genetic_values(m, arch)
    assert np.var(g, ddof=1) / np.var(y.values, ddof=1) == pytest.approx(0.55, abs=0.05)


def test_crosspop_monomorphic_target():
    m = panmictic(100, 100, seed=8)
    target = MarkerMatrix(np.zeros((30, 100)), m.marker_ids, [f"t{i}" for i in range(30)])
    ys = bs.crosspop_simulate([m, target], 10, 0.55, seed=0, sigma_e=1e-9)
    assert np.ptp(ys[1].values) < 1e-6
