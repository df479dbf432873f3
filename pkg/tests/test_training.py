"""Tests for clipping, optimizers, the privatised step and the training loop."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dpdm.data.models import LabeledImageSet
from dpdm.diffusion.loss import make_loss_fn
from dpdm.diffusion.timesteps import TimestepMixture
from dpdm.numerics import ParameterSet, Tensor, value_and_grad
from dpdm.parsers.checkpoint_parser import Checkpoint
from dpdm.training import (
    AdamHyper,
    AdamState,
    AugmentationPolicy,
    DpTrainConfig,
    augmented_value_and_grad,
    clip,
    dp_adam_update,
    draw_augmented_views,
    learning_rate_at,
    poisson_batch_indices,
    private_step,
    privatized_gradient,
    run_accounting,
    sgd_update,
    train,
)
from dpdm.utils.errors import CheckpointError, ConfigError, NonFiniteGradientError, ValidationError
from dpdm.utils.rng import RngStreams


def make_config(**overrides):
    values = dict(clip_norm=1.0, noise_multiplier=0.0, batch_size=4, microbatch_size=4, steps=1, optimizer="dp-sgd")
    values.update(overrides)
    return DpTrainConfig(**values)


class TestClip:
    def test_scales_down_to_clip_norm(self):
        v = ParameterSet({"a": np.array([3.0]), "b": np.array([4.0])})
        clipped = clip(v, 1.0)
        assert clipped.global_norm() == pytest.approx(1.0)
        assert clipped["a"][0] == pytest.approx(0.6)

    def test_short_vectors_unchanged(self):
        v = ParameterSet({"a": np.array([0.3, 0.4])})
        assert clip(v, 1.0).allclose(v, rtol=0)

    def test_infinite_clip_norm_is_identity(self):
        v = ParameterSet({"a": np.array([300.0, 400.0])})
        assert clip(v, math.inf) is v

    @pytest.mark.parametrize("clip_norm", [0.0, -1.0])
    def test_non_positive_clip_norm(self, clip_norm):
        with pytest.raises(ValidationError):
            clip(ParameterSet({"a": np.ones(2)}), clip_norm)

    @given(
        st.lists(st.floats(min_value=-1e4, max_value=1e4), min_size=1, max_size=12),
        st.floats(min_value=1e-6, max_value=1e3),
    )
    @settings(max_examples=100, deadline=None)
    def test_bound_holds(self, values, clip_norm):
        clipped = clip(ParameterSet({"a": np.array(values)}), clip_norm)
        assert clipped.global_norm() <= clip_norm * (1 + 1e-6)


class TestOptimizers:
    def test_sgd_step(self):
        params = ParameterSet({"w": np.array([1.0, 2.0])})
        g = ParameterSet({"w": np.array([0.5, -1.0])})
        assert sgd_update(params, g, 0.1)["w"].tolist() == pytest.approx([0.95, 2.1])

    def test_adam_first_step_moves_by_learning_rate(self):
        params = ParameterSet({"w": np.array([1.0, -1.0])})
        g = ParameterSet({"w": np.array([0.2, -3.0])})
        hyper = AdamHyper(learning_rate=0.01, beta1=0.9, beta2=0.999, eps=1e-12)
        new_params, state = dp_adam_update(params, AdamState.zeros(params), g, hyper)
        assert state.step == 1
        assert new_params["w"].tolist() == pytest.approx([0.99, -0.99])

    def test_adam_recursion(self):
        params = ParameterSet({"w": np.array([0.0])})
        hyper = AdamHyper(learning_rate=0.1, beta1=0.9, beta2=0.99, eps=1e-8)
        state = AdamState.zeros(params)
        for g in (1.0, 3.0):
            params, state = dp_adam_update(params, state, ParameterSet({"w": np.array([g])}), hyper)

        m = 0.9 * 0.1 * 1.0 + 0.1 * 3.0
        v = 0.99 * 0.01 * 1.0 + 0.01 * 9.0
        second = 0.1 * (m / (1 - 0.9**2)) / (np.sqrt(v / (1 - 0.99**2)) + 1e-8)
        assert state.m["w"][0] == pytest.approx(m)
        assert state.v["w"][0] == pytest.approx(v)
        assert params["w"][0] == pytest.approx(-0.1 - second, rel=1e-6)

    def test_warmup(self):
        assert learning_rate_at(0, 1.0, 4) == pytest.approx(0.25)
        assert learning_rate_at(3, 1.0, 4) == pytest.approx(1.0)
        assert learning_rate_at(10, 1.0, 4) == pytest.approx(1.0)
        assert learning_rate_at(0, 1.0, 0) == 1.0


class TestConfigs:
    @pytest.mark.parametrize(
        "overrides,key",
        [
            ({"clip_norm": 0.0}, "clip_norm"),
            ({"noise_multiplier": -1.0}, "noise_multiplier"),
            ({"noise_multiplier": 1.0, "clip_norm": math.inf}, "noise_multiplier"),
            ({"microbatch_size": 8}, "microbatch_size"),
            ({"steps": -1}, "steps"),
            ({"optimizer": "dp-lamb"}, "optimizer"),
            ({"delta": 1.0}, "delta"),
        ],
    )
    def test_invalid_values_name_the_key(self, overrides, key):
        with pytest.raises(ConfigError) as exc:
            make_config(**overrides)
        assert exc.value.key == key

    def test_non_private_sentinel(self):
        assert not make_config(clip_norm=math.inf).is_private
        assert make_config().is_private

    def test_multiplicity_needs_augmentation(self):
        with pytest.raises(ConfigError):
            AugmentationPolicy(flip=False, max_shift=0, resample_timesteps=False, samples=4)
        assert AugmentationPolicy(flip=False, max_shift=0, resample_timesteps=True, samples=4).varies


class TestAugmentedGradient:
    def test_multiplicity_gradient_is_mean_of_draws(self, tiny_model, params64, schedule, mixture):
        policy = AugmentationPolicy(flip=True, max_shift=1, samples=4)
        image = np.random.default_rng(1).uniform(-1, 1, size=(4, 4, 1))
        rng = np.random.default_rng(2)
        draws = draw_augmented_views(image, policy, mixture, rng, rng, np.float64)

        _, joint = augmented_value_and_grad(tiny_model, params64, schedule, 1, draws)
        singles = []
        for k in range(4):
            single = type(draws)(draws.images[k : k + 1], draws.timesteps[k : k + 1], draws.noise[k : k + 1])
            singles.append(augmented_value_and_grad(tiny_model, params64, schedule, 1, single)[1])
        mean = ParameterSet.sum_all(singles).scaled(0.25)
        assert joint.allclose(mean, rtol=1e-6, atol=1e-12)

    def test_shared_timestep_without_resampling(self, mixture):
        policy = AugmentationPolicy(flip=True, resample_timesteps=False, samples=5)
        rng = np.random.default_rng(0)
        draws = draw_augmented_views(np.zeros((4, 4, 1)), policy, mixture, rng, rng)
        assert len(set(draws.timesteps.tolist())) == 1


class TestPrivatizedGradient:
    def test_noise_std_matches_sigma_c_over_b(self, tiny_model, params64, schedule, mixture):
        config = make_config(clip_norm=0.5, noise_multiplier=2.0, batch_size=8, microbatch_size=4)
        policy = AugmentationPolicy()
        empty = np.zeros((0, 4, 4, 1))
        rngs = RngStreams(0)
        draws = []
        while sum(d.size for d in draws) < 30_000:
            g_hat = privatized_gradient(tiny_model, params64, empty, np.zeros(0, dtype=np.int64), config, policy, mixture, schedule, rngs).g_hat
            draws.append(g_hat.flatten())
        values = np.concatenate(draws)
        expected = 2.0 * 0.5 / 8
        assert abs(values.std() - expected) <= 0.02 * expected

    def test_microbatch_size_does_not_change_g_hat(self, tiny_model, params64, schedule, mixture, tiny_dataset):
        policy = AugmentationPolicy(flip=True, max_shift=1, samples=2)
        images, labels = tiny_dataset.images[:4].astype(np.float64), tiny_dataset.labels[:4]
        results = []
        for microbatch, workers in ((1, None), (2, None), (4, None), (2, 3)):
            config = make_config(clip_norm=0.05, noise_multiplier=0.7, microbatch_size=microbatch, augmult=2, max_workers=workers)
            results.append(
                privatized_gradient(tiny_model, params64, images, labels, config, policy, mixture, schedule, RngStreams(11)).g_hat
            )
        for other in results[1:]:
            assert other.allclose(results[0], rtol=1e-6, atol=1e-12)

    def test_averaging_happens_before_clipping(self, tiny_model, params64, schedule, mixture, tiny_dataset):
        clip_norm = 1e-3
        policy = AugmentationPolicy(flip=True, max_shift=1, samples=2)
        config = make_config(clip_norm=clip_norm, batch_size=1, microbatch_size=1, augmult=2)
        image, label = tiny_dataset.images[0].astype(np.float64), int(tiny_dataset.labels[0])

        replay = RngStreams(5)
        draws = draw_augmented_views(image, policy, mixture, replay.augment, replay.diffusion, np.float64)
        per_draw = []
        for k in range(2):
            single = type(draws)(draws.images[k : k + 1], draws.timesteps[k : k + 1], draws.noise[k : k + 1])
            per_draw.append(augmented_value_and_grad(tiny_model, params64, schedule, label, single)[1])
        clip_of_mean = clip((per_draw[0] + per_draw[1]).scaled(0.5), clip_norm)
        mean_of_clips = (clip(per_draw[0], clip_norm) + clip(per_draw[1], clip_norm)).scaled(0.5)

        g_hat = privatized_gradient(
            tiny_model, params64, image[None], np.array([label]), config, policy, mixture, schedule, RngStreams(5)
        ).g_hat
        assert g_hat.allclose(clip_of_mean, rtol=1e-6, atol=1e-15)
        assert g_hat.global_norm() == pytest.approx(clip_norm, rel=1e-6)
        assert mean_of_clips.global_norm() < clip_norm * (1 - 1e-6)

    def test_non_private_path_matches_unclipped_private_path(self, tiny_model, params64, schedule, mixture, tiny_dataset):
        policy = AugmentationPolicy(flip=True, samples=2)
        images, labels = tiny_dataset.images[:4].astype(np.float64), tiny_dataset.labels[:4]
        fast = privatized_gradient(
            tiny_model, params64, images, labels, make_config(clip_norm=math.inf, augmult=2, microbatch_size=2),
            policy, mixture, schedule, RngStreams(3),
        )
        slow = privatized_gradient(
            tiny_model, params64, images, labels, make_config(clip_norm=1e12, augmult=2, microbatch_size=2),
            policy, mixture, schedule, RngStreams(3),
        )
        assert fast.g_hat.allclose(slow.g_hat, rtol=1e-6, atol=1e-12)
        assert fast.clipped_norms.size == 0
        assert slow.clipped_norms.size == 4

    def test_clip_bound_fuzz(self, tiny_model, params64, schedule, mixture, tiny_dataset):
        rng = np.random.default_rng(0)
        policy = AugmentationPolicy(flip=True, samples=1)
        rngs = RngStreams(21)
        for _ in range(100):
            clip_norm = float(10 ** rng.uniform(-4, 1))
            batch = rng.choice(len(tiny_dataset), size=3, replace=False)
            config = make_config(clip_norm=clip_norm, batch_size=3, microbatch_size=2)
            result = privatized_gradient(
                tiny_model, params64, tiny_dataset.images[batch].astype(np.float64), tiny_dataset.labels[batch],
                config, policy, mixture, schedule, rngs,
            )
            assert np.all(result.clipped_norms <= clip_norm * (1 + 1e-6))

    def test_non_finite_gradient_names_parameter(self, tiny_model, params64, schedule, mixture, tiny_dataset):
        broken = params64.map(lambda a: a.copy())
        arrays = {name: np.array(broken[name]) for name in broken}
        arrays["output.bias"] = np.full_like(arrays["output.bias"], np.nan)
        with pytest.raises(NonFiniteGradientError) as exc:
            privatized_gradient(
                tiny_model, ParameterSet(arrays), tiny_dataset.images[:2].astype(np.float64), tiny_dataset.labels[:2],
                make_config(batch_size=2, microbatch_size=2), AugmentationPolicy(), mixture, schedule, RngStreams(0),
            )
        assert exc.value.path

    def test_noiseless_singleton_step_is_clipped_sgd(self, tiny_model, params64, schedule, mixture, tiny_dataset):
        clip_norm, rate = 1e-3, 0.5
        policy = AugmentationPolicy(flip=False, samples=1)
        config = make_config(clip_norm=clip_norm, batch_size=1, microbatch_size=1, learning_rate=rate)
        image, label = tiny_dataset.images[0].astype(np.float64), int(tiny_dataset.labels[0])

        replay = RngStreams(8)
        draws = draw_augmented_views(image, policy, mixture, replay.augment, replay.diffusion, np.float64)
        _, g = augmented_value_and_grad(tiny_model, params64, schedule, label, draws)
        assert g.global_norm() > clip_norm
        expected = params64.zip_map(clip(g, clip_norm), lambda p, c: p - rate * c)

        outcome = private_step(
            tiny_model, params64, image[None], np.array([label]), config, policy, mixture, schedule, RngStreams(8)
        )
        assert outcome.params.allclose(expected, rtol=1e-9, atol=1e-15)

    def test_step_reports_clipped_norm_quantiles(self, tiny_model, params64, schedule, mixture, tiny_dataset):
        outcome = private_step(
            tiny_model, params64, tiny_dataset.images[:4].astype(np.float64), tiny_dataset.labels[:4],
            make_config(clip_norm=1e-3, noise_multiplier=1.0), AugmentationPolicy(), mixture, schedule, RngStreams(0),
        )
        assert outcome.stats.grad_norm_median_clipped <= 1e-3 * (1 + 1e-6)
        assert outcome.stats.batch_size == 4
        assert not outcome.params.allclose(params64, rtol=0)


class TestTrain:
    @pytest.fixture
    def policy(self):
        return AugmentationPolicy(flip=True, samples=1)

    def test_poisson_batches_have_expected_size(self):
        rng = np.random.default_rng(0)
        sizes = [len(poisson_batch_indices(1000, 0.05, rng)) for _ in range(200)]
        assert np.mean(sizes) == pytest.approx(50, rel=0.05)

    def test_zero_steps_returns_initial_parameters(self, tiny_dataset, tiny_model, policy, mixture, schedule, tiny_arch):
        init = Checkpoint(params=tiny_model.init_params(np.random.default_rng(0)), arch=tiny_arch)
        result = train(tiny_dataset, make_config(steps=0), policy, mixture, schedule, seed=0, init=init)
        assert result.steps_completed == 0
        assert result.checkpoint.params.allclose(init.params, rtol=0)
        assert result.log == []
        assert result.status == "completed"

    def test_same_seed_same_run(self, tiny_dataset, policy, mixture, schedule, tiny_arch):
        config = make_config(steps=3, noise_multiplier=1.0, optimizer="dp-adam", learning_rate=1e-2)
        a = train(tiny_dataset, config, policy, mixture, schedule, seed=4, arch=tiny_arch)
        b = train(tiny_dataset, config, policy, mixture, schedule, seed=4, arch=tiny_arch)
        assert a.checkpoint.params.allclose(b.checkpoint.params, rtol=0)
        assert a.checkpoint.ema.allclose(b.checkpoint.ema, rtol=0)

    def test_log_and_epsilon(self, tmp_path, tiny_dataset, policy, mixture, schedule, tiny_arch):
        log_path = tmp_path / "logs" / "train.jsonl"
        config = make_config(steps=3, noise_multiplier=1.5)
        result = train(tiny_dataset, config, policy, mixture, schedule, seed=0, arch=tiny_arch, log_path=log_path)

        records = [json.loads(line) for line in log_path.read_text().splitlines()]
        assert [r["step"] for r in records] == [0, 1, 2]
        epsilons = [r["epsilon_spent"] for r in records]
        assert epsilons == sorted(epsilons)
        assert result.epsilon == pytest.approx(epsilons[-1])
        assert result.delta == pytest.approx(1 / len(tiny_dataset))
        assert result.checkpoint.meta["status"] == "completed"

    def test_budget_exhaustion_stops_early(self, tiny_dataset, policy, mixture, schedule, tiny_arch):
        config = make_config(steps=50, noise_multiplier=0.8, max_epsilon=3.0)
        result = train(tiny_dataset, config, policy, mixture, schedule, seed=0, arch=tiny_arch)
        assert result.budget_exhausted
        assert 0 < result.steps_completed < 50
        assert result.epsilon <= 3.0
        assert result.checkpoint.meta["status"] == "budget_exhausted"

    def test_non_private_run_has_no_epsilon(self, tiny_dataset, policy, mixture, schedule, tiny_arch):
        config = make_config(clip_norm=math.inf, steps=2)
        result = train(tiny_dataset, config, policy, mixture, schedule, seed=0, arch=tiny_arch)
        assert result.epsilon is None
        assert result.checkpoint.meta["epsilon"] == "inf"

    def test_non_private_run_is_plain_sgd(self, tiny_dataset, mixture, schedule, tiny_arch, tiny_model):
        policy = AugmentationPolicy(flip=False, samples=1)
        n, rate = len(tiny_dataset), 0.05
        config = make_config(clip_norm=math.inf, batch_size=n, microbatch_size=n, steps=3, learning_rate=rate)
        result = train(tiny_dataset, config, policy, mixture, schedule, seed=6, arch=tiny_arch, dtype=np.float64)

        # replay the same random streams through a plain mean-loss gradient
        rngs = RngStreams(6)
        params = tiny_model.init_params(rngs.init, np.float64)
        loss_fn = make_loss_fn(tiny_model, schedule)
        for _ in range(3):
            batch = poisson_batch_indices(n, 1.0, rngs.batch)
            assert batch.tolist() == list(range(n))
            draws = [
                draw_augmented_views(tiny_dataset.images[i], policy, mixture, rngs.augment, rngs.diffusion, np.float64)
                for i in batch
            ]
            x0 = Tensor(np.concatenate([d.images for d in draws]), dtype=np.float64)
            t = np.concatenate([d.timesteps for d in draws])
            eps = np.concatenate([d.noise for d in draws])
            _, grad = value_and_grad(loss_fn, params, x0, tiny_dataset.labels[batch], t, eps)
            params = params.zip_map(grad, lambda p, g: p - rate * g)

        assert result.checkpoint.params.allclose(params, rtol=1e-9, atol=1e-12)

    def test_progress_callback(self, tiny_dataset, policy, mixture, schedule, tiny_arch, mocker):
        callback = mocker.Mock()
        train(tiny_dataset, make_config(steps=2), policy, mixture, schedule, seed=0, arch=tiny_arch, progress=callback)
        assert callback.call_count == 2

    def test_rejects_mismatched_mixture(self, tiny_dataset, policy, schedule, tiny_arch):
        with pytest.raises(ValidationError):
            train(tiny_dataset, make_config(), policy, TimestepMixture.uniform(schedule.T + 1), schedule, seed=0, arch=tiny_arch)

    def test_rejects_policy_multiplicity_mismatch(self, tiny_dataset, mixture, schedule, tiny_arch):
        with pytest.raises(ValidationError):
            train(tiny_dataset, make_config(augmult=2), AugmentationPolicy(samples=1), mixture, schedule, seed=0, arch=tiny_arch)

    def test_rejects_image_shape_mismatch(self, policy, mixture, schedule, tiny_arch):
        dataset = LabeledImageSet(images=np.zeros((4, 6, 6, 1)), labels=np.array([0, 1, 0, 1]), num_classes=2)
        with pytest.raises(CheckpointError):
            train(dataset, make_config(), policy, mixture, schedule, seed=0, arch=tiny_arch)


class TestAccounting:
    def test_mnist_regime_config(self):
        config = DpTrainConfig(
            clip_norm=1.0, noise_multiplier=2.852, batch_size=4096, microbatch_size=256, steps=4000, augmult=128, delta=1e-5
        )
        assert AugmentationPolicy(flip=True, max_shift=4, samples=config.augmult).samples == 128

        q, delta, accountant = run_accounting(config, 60_000)
        assert q == pytest.approx(4096 / 60_000)
        assert delta == 1e-5
        assert 8.0 <= accountant.epsilon_after(config.steps, delta) <= 13.0

    def test_defaults(self):
        q, delta, accountant = run_accounting(make_config(noise_multiplier=1.0, batch_size=8, microbatch_size=8), 40)
        assert q == pytest.approx(0.2)
        assert delta == pytest.approx(1 / 40)
        assert accountant is not None
        assert run_accounting(make_config(batch_size=8, microbatch_size=8), 4)[0] == 1.0
        assert run_accounting(make_config(), 40)[2] is None

    def test_empty_dataset(self):
        with pytest.raises(ValidationError):
            run_accounting(make_config(), 0)
