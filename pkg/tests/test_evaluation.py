"""Tests for Fréchet distance, classifiers, downstream evaluation and model selection."""

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from scipy.linalg import sqrtm

from dpdm.data import LabeledImageSet, ToyDomainSpec, generate_toy
from dpdm.evaluation import (
    AblationRow,
    ClassifierConfig,
    ConvClassifier,
    DiscriminatorResult,
    GaussianFit,
    ModelSelectionRecord,
    best_in_top_k,
    domain_discriminator,
    ensemble_accuracy,
    ensemble_gain,
    ensemble_members,
    expand_grid,
    fid_like_score,
    fit_gaussian,
    frechet_distance,
    model_selection_study,
    sample_size_scaling,
    spearman,
    summarize,
    train_classifier,
    train_downstream,
    train_feature_extractor,
)
from dpdm.utils.errors import EvaluationError


def random_spd(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + 0.1 * np.eye(dim)


@pytest.fixture
def quick_config():
    return ClassifierConfig(steps=3, batch_size=4, feature_dim=8)


@pytest.fixture(scope="module")
def toy_domains():
    """Rendered 16x16 pre-train and fine-tune sets plus an extractor trained on the pre-train domain."""
    pretrain = ToyDomainSpec.for_domain("pretrain")
    finetune = ToyDomainSpec.for_domain("finetune")
    extractor = train_feature_extractor(
        generate_toy(pretrain, 400, "train"), ClassifierConfig(steps=60, batch_size=32, feature_dim=16)
    )
    return {
        "pretrain": generate_toy(pretrain, 600, "test"),
        "finetune_train": generate_toy(finetune, 400, "train"),
        "finetune": generate_toy(finetune, 1000, "test"),
        "extractor": extractor,
    }


@pytest.fixture
def separable():
    """Constant dark images are class 0, constant bright images class 1."""
    images = np.concatenate([np.full((8, 4, 4, 1), -0.8), np.full((8, 4, 4, 1), 0.8)])
    return LabeledImageSet(images=images, labels=[0] * 8 + [1] * 8, num_classes=2)


class TestFrechetDistance:
    def test_identical_fits(self):
        fit = GaussianFit(mean=np.ones(3), cov=np.eye(3))
        assert frechet_distance(fit, fit) == 0.0

    def test_one_dimensional_closed_form(self):
        a = GaussianFit(mean=[0.0], cov=[[1.0]])
        b = GaussianFit(mean=[1.0], cov=[[4.0]])
        assert frechet_distance(a, b) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_matrix_square_root(self, seed):
        rng = np.random.default_rng(seed)
        a = GaussianFit(mean=rng.normal(size=5), cov=random_spd(rng, 5))
        b = GaussianFit(mean=rng.normal(size=5), cov=random_spd(rng, 5))

        diff = a.mean - b.mean
        expected = diff @ diff + np.trace(a.cov + b.cov - 2.0 * np.real(sqrtm(a.cov @ b.cov)))
        assert frechet_distance(a, b) == pytest.approx(expected, rel=1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(4)
        a = GaussianFit(mean=rng.normal(size=4), cov=random_spd(rng, 4))
        b = GaussianFit(mean=rng.normal(size=4), cov=random_spd(rng, 4))
        assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(EvaluationError):
            frechet_distance(GaussianFit(np.zeros(2), np.eye(2)), GaussianFit(np.zeros(3), np.eye(3)))

    @pytest.mark.parametrize(
        "mean,cov",
        [
            (np.zeros(2), np.eye(3)),
            (np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]])),
            (np.zeros(2), np.diag([1.0, -1.0])),
        ],
    )
    def test_invalid_fit(self, mean, cov):
        with pytest.raises(EvaluationError):
            GaussianFit(mean=mean, cov=cov)

    def test_small_samples_are_regularised(self):
        rng = np.random.default_rng(0)
        few = fit_gaussian(rng.normal(size=(3, 4)))
        many = fit_gaussian(rng.normal(size=(50, 4)))
        assert few.regularized
        assert np.linalg.eigvalsh(few.cov).min() > 0
        assert not many.regularized
        assert fit_gaussian(np.ones((1, 2))).regularized

    def test_fit_rejects_empty_features(self):
        with pytest.raises(EvaluationError):
            fit_gaussian(np.zeros((0, 3)))


class TestClassifier:
    def test_shapes_and_probabilities(self, tiny_dataset, quick_config):
        classifier = train_classifier(tiny_dataset, quick_config)
        probabilities = classifier.predict_proba(tiny_dataset.images)
        assert probabilities.shape == (8, 2)
        assert np.allclose(probabilities.sum(axis=1), 1.0)
        assert classifier.embed(tiny_dataset.images).shape == (8, 8)
        assert 0.0 <= classifier.accuracy(tiny_dataset) <= 1.0

    def test_training_is_seeded(self, tiny_dataset, quick_config):
        a = train_classifier(tiny_dataset, quick_config)
        b = train_classifier(tiny_dataset, quick_config)
        assert a.params.allclose(b.params, rtol=0, atol=0)

    def test_learns_separable_classes(self, separable):
        config = ClassifierConfig(steps=100, batch_size=8, feature_dim=8, flip=False, max_shift=0)
        assert train_classifier(separable, config).accuracy(separable) >= 0.9

    def test_rejects_wrong_image_shape(self, tiny_dataset, quick_config):
        classifier = train_classifier(tiny_dataset, quick_config)
        with pytest.raises(EvaluationError):
            classifier.predict(np.zeros((2, 5, 5, 1)))

    def test_needs_two_classes(self):
        with pytest.raises(EvaluationError):
            ConvClassifier("conv-small", (4, 4, 1), num_classes=1, feature_dim=8)

    @pytest.mark.parametrize("kwargs", [{"arch": "resnet"}, {"momentum": 1.0}, {"label_smoothing": 1.0}, {"steps": -1}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(EvaluationError):
            ClassifierConfig(**kwargs)


class TestFidScore:
    def test_identical_sets_score_zero(self, tiny_dataset, quick_config):
        extractor = train_feature_extractor(tiny_dataset, quick_config)
        result = fid_like_score(tiny_dataset, tiny_dataset, extractor, per_class=True)
        assert result.score == 0.0
        assert result.regularized
        assert sorted(result.per_class) == [0, 1]

    def test_image_shape_mismatch(self, tiny_dataset, quick_config):
        extractor = train_feature_extractor(tiny_dataset, quick_config)
        other = LabeledImageSet(images=np.zeros((2, 6, 6, 1)), labels=[0, 1], num_classes=2)
        with pytest.raises(EvaluationError):
            fid_like_score(tiny_dataset, other, extractor)

    def test_invariant_under_joint_permutation(self, tiny_dataset, quick_config):
        extractor = train_feature_extractor(tiny_dataset, quick_config)
        inverted = LabeledImageSet(images=-tiny_dataset.images, labels=tiny_dataset.labels, num_classes=2)
        order = np.random.default_rng(3).permutation(8)
        expected = fid_like_score(tiny_dataset, inverted, extractor).score
        permuted = fid_like_score(tiny_dataset.subset(order), inverted.subset(order), extractor).score
        assert expected > 0.0
        assert permuted == pytest.approx(expected, rel=1e-5)

    @pytest.mark.slow
    def test_increases_with_image_noise(self, toy_domains):
        real = toy_domains["finetune"]
        noise = np.random.default_rng(11).normal(size=real.images.shape)
        scores = []
        for scale in (0.05, 0.1, 0.2):
            noisy = LabeledImageSet(
                images=np.clip(real.images + scale * noise, -1.0, 1.0), labels=real.labels, num_classes=real.num_classes
            )
            scores.append(fid_like_score(real, noisy, toy_domains["extractor"]).score)
        assert 0.0 < scores[0] < scores[1] < scores[2]

    @pytest.mark.slow
    def test_disjoint_domains_score_far_above_split_halves(self, toy_domains):
        finetune, extractor = toy_domains["finetune"], toy_domains["extractor"]
        halves = finetune.subset(range(0, 1000, 2)), finetune.subset(range(1, 1000, 2))
        within = fid_like_score(*halves, extractor)
        across = fid_like_score(toy_domains["pretrain"], finetune, extractor)
        assert not within.regularized
        assert across.score >= 10.0 * within.score


class TestDownstream:
    def test_label_space_mismatch(self, tiny_dataset, quick_config):
        real = LabeledImageSet(images=np.zeros((3, 4, 4, 1)), labels=[0, 1, 2], num_classes=3)
        with pytest.raises(EvaluationError):
            train_downstream(tiny_dataset, quick_config, real)

    def test_downstream_accuracy(self, separable):
        config = ClassifierConfig(steps=100, batch_size=8, feature_dim=8, flip=False, max_shift=0)
        assert train_downstream(separable, config, separable) >= 0.9

    def test_ensemble_members_differ_in_batch_seed(self, quick_config):
        members = ensemble_members(quick_config, 3)
        assert [m.batch_seed for m in members] == [0, 1, 2]
        assert {m.init_seed for m in members} == {quick_config.init_seed}
        with pytest.raises(EvaluationError):
            ensemble_members(quick_config, 2, batch_seeds=[1])
        with pytest.raises(EvaluationError):
            ensemble_members(quick_config, 0)

    def test_single_member_ensemble_is_the_plain_classifier(self, tiny_dataset, quick_config):
        single = train_downstream(tiny_dataset, quick_config, tiny_dataset)
        assert ensemble_accuracy(tiny_dataset, quick_config, 1, tiny_dataset) == single

    def test_duplicate_members_average_to_one(self, tiny_dataset, quick_config):
        single = ensemble_accuracy(tiny_dataset, quick_config, 1, tiny_dataset)
        assert ensemble_accuracy(tiny_dataset, quick_config, 3, tiny_dataset, batch_seeds=[0, 0, 0]) == single

    @pytest.mark.slow
    def test_shuffled_labels_score_at_chance(self, toy_domains):
        # Once labels carry no information about the images, accuracy sits at 1/k
        train, test = toy_domains["finetune_train"], toy_domains["finetune"]
        rng = np.random.default_rng(5)
        config = ClassifierConfig(steps=40, batch_size=32, feature_dim=16)
        accuracy = train_downstream(train.shuffled_labels(rng), config, test.shuffled_labels(rng))
        assert accuracy == pytest.approx(1.0 / test.num_classes, abs=0.05)

    @pytest.mark.slow
    def test_ensembling_does_not_hurt(self, toy_domains):
        train, test = toy_domains["finetune_train"], toy_domains["finetune"]
        config = ClassifierConfig(steps=40, batch_size=32, feature_dim=16)
        summary = summarize(ensemble_gain(train, test, config, members=5, seeds=range(5)))
        assert summary[("ensemble", "ensemble5", "accuracy")] >= summary[("ensemble", "single", "accuracy")]

    def test_discriminator_needs_both_domains(self, tiny_dataset, quick_config):
        with pytest.raises(EvaluationError):
            domain_discriminator(tiny_dataset.subset([0]), tiny_dataset, tiny_dataset, quick_config)
        with pytest.raises(EvaluationError):
            domain_discriminator(tiny_dataset, tiny_dataset, tiny_dataset, quick_config, holdout_fraction=1.5)

    def test_discriminator_result(self, separable):
        dark, bright = separable.subset(range(8)), separable.subset(range(8, 16))
        config = ClassifierConfig(steps=100, batch_size=8, feature_dim=8, flip=False, max_shift=0)
        result = domain_discriminator(dark, bright, bright, config, holdout_fraction=0.25)
        assert result.reliable
        assert result.fraction_finetune >= 0.9

    def test_reliability_threshold(self):
        assert not DiscriminatorResult(0.5, test_accuracy=0.6, finetune_recall=0.5, pretrain_recall=0.7).reliable


class TestModelSelection:
    def test_spearman(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [30, 20, 10]) == pytest.approx(-1.0)
        assert spearman([1, 1, 1], [1, 2, 3]) is None
        assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(4.5 / np.sqrt(4.5 * 5.0))

    @given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=2, max_size=12))
    @settings(max_examples=50, deadline=None)
    def test_spearman_ignores_monotone_transforms(self, pairs):
        a = np.array([x for x, _ in pairs], dtype=np.float64)
        b = np.array([y for _, y in pairs], dtype=np.float64)
        rho = spearman(a, b)
        transformed = spearman(np.exp(a / 10.0), b**3 + b)
        if rho is None:
            assert transformed is None
        else:
            assert -1.0 <= rho <= 1.0
            assert transformed == pytest.approx(rho, abs=1e-12)

    def test_spearman_length_mismatch(self):
        with pytest.raises(EvaluationError):
            spearman([1, 2], [1, 2, 3])

    def test_best_in_top_k(self):
        synthetic, real = [0.5, 0.9, 0.7], [0.6, 0.8, 0.95]
        assert best_in_top_k(synthetic, real, k=2)
        assert not best_in_top_k(synthetic, real, k=1)
        assert not best_in_top_k([], [])

    def test_default_grid(self):
        grid = expand_grid()
        assert len(grid) == 12
        assert grid[0] == ("conv-small", 0.01, 0.0)
        assert {arch for arch, _, _ in grid} == {"conv-small", "conv-wide"}

    def test_study_needs_enough_configurations(self, tiny_dataset):
        grid = expand_grid()[:3]
        with pytest.raises(EvaluationError):
            model_selection_study(tiny_dataset, tiny_dataset, tiny_dataset, tiny_dataset, grid)

    @pytest.mark.slow
    def test_study_records(self, tiny_dataset, quick_config):
        grid = expand_grid()[::2]
        study = model_selection_study(tiny_dataset, tiny_dataset, tiny_dataset, tiny_dataset, grid, quick_config, max_workers=2)
        assert [r.key for r in study.setting_a] == [f"{a}/lr={lr:g}/wd={wd:g}" for a, lr, wd in grid]
        assert len(study.setting_b) == len(grid)

    def test_record_validation(self):
        with pytest.raises(EvaluationError):
            ModelSelectionRecord("conv-small", 0.1, 0.0, accuracy_synthetic=1.2, accuracy_real=0.5)


class TestAblations:
    def test_summarize_averages_over_seeds(self):
        rows = [
            AblationRow("ensemble", "single", 0, "accuracy", 0.6),
            AblationRow("ensemble", "single", 1, "accuracy", 0.8),
            AblationRow("ensemble", "ensemble5", 0, "accuracy", 0.9),
        ]
        summary = summarize(rows)
        assert summary[("ensemble", "single", "accuracy")] == pytest.approx(0.7)
        assert summary[("ensemble", "ensemble5", "accuracy")] == pytest.approx(0.9)

    def test_sample_size_needs_a_large_pool(self, tiny_dataset, quick_config):
        with pytest.raises(EvaluationError):
            sample_size_scaling(tiny_dataset, tiny_dataset, quick_config, base_size=4, factors=(1, 4))

    def test_sample_size_rows(self, tiny_dataset, quick_config):
        rows = sample_size_scaling(tiny_dataset, tiny_dataset, quick_config, base_size=2, factors=(1, 4))
        assert [row.variant for row in rows] == ["1n", "4n"]

    @pytest.mark.slow
    def test_more_samples_help(self, toy_domains):
        pool, test = toy_domains["finetune_train"], toy_domains["finetune"]
        config = ClassifierConfig(steps=60, batch_size=32, feature_dim=16)
        summary = summarize(sample_size_scaling(pool, test, config, base_size=40, factors=(1, 4), seeds=range(5)))
        assert summary[("sample_size", "4n", "accuracy")] >= summary[("sample_size", "1n", "accuracy")]
