"""Tests for run configuration, run directories, factories and report writers."""

import math
from pathlib import Path

import pytest

from dpdm.evaluation import summarize
from dpdm.formatters import TsvWriter
from dpdm.parsers import ConfigParser
from dpdm.processors import (
    SCHEMA,
    AblationProcessor,
    CalibrationProcessor,
    DomainData,
    RunDirectory,
    default_threads,
    resolve_config,
)
from dpdm.processors.factories import (
    architecture_from,
    classifier_config_from,
    mixture_from,
    policy_from,
    pretrain_config,
    private_train_config,
)
from dpdm.utils.errors import ConfigError, ReportError

SMALL_TOY = ["--image-size", "8", "--pretrain-size", "12", "--train-size", "40", "--val-size", "8", "--test-size", "8"]


class TestResolveConfig:
    def test_defaults(self):
        config = resolve_config("pretrain")
        assert config["timesteps"] == 1000
        assert config["mixture"] == "cifar10"
        assert config.seed == 0
        assert config.out == Path("runs")
        assert set(config.values) == set(SCHEMA)

    def test_layering(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("timesteps = 50\nsteps = 9\nseed = 3\nout = elsewhere\n", encoding="utf-8")

        config = resolve_config("pretrain", str(path), ["--timesteps", "20"])
        assert config["timesteps"] == 20
        assert config["steps"] == 9
        assert config.seed == 3
        assert config.out == Path("elsewhere")

        flagged = resolve_config("pretrain", str(path), seed=7, out=str(tmp_path))
        assert flagged.seed == 7
        assert flagged.out == tmp_path

    @pytest.mark.parametrize(
        "overrides,key",
        [
            (["--colour", "red"], "colour"),
            (["--steps", "many"], "steps"),
            (["--optimizer", "sgd"], "optimizer"),
            (["--flip", "sometimes"], "flip"),
            (["stray"], "config"),
        ],
    )
    def test_errors_name_the_key(self, overrides, key):
        with pytest.raises(ConfigError) as exc:
            resolve_config("pretrain", overrides=overrides)
        assert exc.value.key == key

    def test_value_parsing(self):
        config = resolve_config(
            "pretrain",
            overrides=["--model-channels", "8,16", "--flip", "no", "--delta", "none", "--epsilons=1,2.5"],
        )
        assert config["model_channels"] == (8, 16)
        assert config["flip"] is False
        assert config["delta"] is None
        assert config["epsilons"] == (1.0, 2.5)

    def test_finetune_needs_exactly_one_privacy_setting(self):
        with pytest.raises(ConfigError):
            resolve_config("finetune")
        with pytest.raises(ConfigError):
            resolve_config("finetune", overrides=["--noise-multiplier", "1.0", "--target-epsilon", "5"])
        assert resolve_config("finetune", overrides=["--target-epsilon", "5"])["target_epsilon"] == 5.0

    def test_ablate_defaults_target_epsilon(self):
        assert resolve_config("ablate")["target_epsilon"] == 10.0
        assert resolve_config("ablate", overrides=["--noise-multiplier", "1.1"])["target_epsilon"] is None

    def test_calibrate_needs_target(self):
        with pytest.raises(ConfigError) as exc:
            resolve_config("calibrate")
        assert exc.value.key == "target_epsilon"

    def test_with_values(self):
        config = resolve_config("sample").with_values(checkpoint="model.dpdm")
        assert config["checkpoint"] == "model.dpdm"
        with pytest.raises(ConfigError):
            config.with_values(nonsense=1)
        with pytest.raises(ConfigError):
            config["nonsense"]

    def test_resolved_text_lists_every_setting(self):
        config = resolve_config("pretrain", overrides=["--timesteps", "20"], seed=2)
        values = ConfigParser().parse_text(config.resolved_text())
        assert values["timesteps"] == "20"
        assert values["command"] == "pretrain"
        assert values["seed"] == "2"
        assert values["checkpoint"] == ""
        assert set(SCHEMA) <= set(values)


class TestThreads:
    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("DPDM_THREADS", "3")
        assert default_threads() == 3
        assert resolve_config("pretrain").threads == 3

    @pytest.mark.parametrize("raw", ["0", "many"])
    def test_invalid_environment(self, monkeypatch, raw):
        monkeypatch.setenv("DPDM_THREADS", raw)
        with pytest.raises(ConfigError):
            default_threads()

    def test_falls_back_to_cpu_count(self, monkeypatch):
        monkeypatch.delenv("DPDM_THREADS", raising=False)
        assert default_threads() >= 1


class TestRunDirectory:
    def test_layout_and_resolved_config(self, tmp_path):
        config = resolve_config("pretrain", out=str(tmp_path))
        run_dir = RunDirectory(tmp_path / "run").create()
        for sub in ("checkpoints", "samples", "logs", "reports"):
            assert (tmp_path / "run" / sub).is_dir()

        path = run_dir.write_resolved(config)
        assert path.name == "config.resolved"
        assert ConfigParser().parse_file(path)["timesteps"] == "1000"


class TestFactories:
    def test_architecture(self):
        config = resolve_config("pretrain", overrides=["--model-channels", "4,8", "--conditional", "false"])
        arch = architecture_from(config, (8, 8, 1), num_classes=4)
        assert arch.channels == (4, 8)
        assert arch.num_classes == 0

    def test_mixture_uses_schedule_length(self):
        config = resolve_config("pretrain", overrides=["--timesteps", "100"])
        assert mixture_from(config).T == 100
        assert mixture_from(config, "uniform").bounds == ((0, 100),)

    def test_pretraining_is_not_private(self):
        train_config = pretrain_config(resolve_config("pretrain"))
        assert not train_config.is_private
        assert train_config.optimizer == "dp-adam"

    def test_private_config(self):
        config = resolve_config("finetune", overrides=["--noise-multiplier", "1.0", "--batch-size", "8", "--microbatch-size", "32"])
        train_config = private_train_config(config, noise_multiplier=1.0, delta=1e-3)
        assert train_config.microbatch_size == 8
        assert train_config.delta == 1e-3
        assert policy_from(config, samples=1).samples == 1

    def test_classifier_seed(self):
        classifier = classifier_config_from(resolve_config("eval-downstream", seed=5))
        assert classifier.init_seed == classifier.batch_seed == 5


class TestDomainData:
    def test_toy_splits(self):
        data = DomainData(resolve_config("pretrain", overrides=SMALL_TOY))
        assert len(data.pretrain) == 12
        assert len(data.train) == 40
        assert data.val.split == "val"
        assert data.test.image_shape == (8, 8, 1)
        assert data.pretrain.domain == "pretrain"
        assert data.num_classes == 4

    def test_idx_needs_paths(self):
        data = DomainData(resolve_config("pretrain", overrides=["--dataset", "idx"]))
        with pytest.raises(ConfigError) as exc:
            data.train
        assert exc.value.key == "train_images"


class TestCalibrationProcessor:
    def test_report(self, tmp_path):
        config = resolve_config(
            "calibrate",
            overrides=SMALL_TOY + ["--target-epsilon", "5", "--batch-size", "4", "--steps", "50", "--epsilons", "2,10"],
            out=str(tmp_path),
        )
        processor = CalibrationProcessor(config, RunDirectory(tmp_path).create())
        report = processor.calibrate()

        assert report.sampling_rate == pytest.approx(0.1)
        assert report.target.delta == pytest.approx(1 / 40)
        assert report.accounted_epsilon == pytest.approx(5.0, rel=1.001e-3)
        assert [p.steps for p in report.sweep] == [20, 100]

        path = processor.write(report)
        assert path == tmp_path / "reports" / "calibration.txt"
        text = path.read_text(encoding="utf-8")
        assert "noise_multiplier = " in text
        assert text.count("sweep = ") == 2
        assert text.count("rdp_curve.") == len(report.curve) == 255
        assert f"optimal_order = {report.optimal_order:g}" in text

    def test_dataset_size_skips_rendering(self, tmp_path):
        overrides = ["--dataset-size", "60000", "--batch-size", "4096", "--steps", "4000", "--target-epsilon", "10", "--delta", "1e-5"]
        config = resolve_config("calibrate", overrides=overrides, out=str(tmp_path))
        data = DomainData(config)
        report = CalibrationProcessor(config, RunDirectory(tmp_path).create(), data).calibrate()

        assert report.sampling_rate == pytest.approx(4096 / 60000)
        assert report.noise_multiplier == pytest.approx(2.852, rel=0.25)
        assert "train" not in vars(data)

    @pytest.mark.parametrize("overrides,key", [(["--dataset-size", "0"], "dataset_size"), (["--train-size", "0"], "train_size")])
    def test_empty_training_set(self, tmp_path, overrides, key):
        config = resolve_config("calibrate", overrides=overrides + ["--target-epsilon", "5"], out=str(tmp_path))
        with pytest.raises(ConfigError) as exc:
            CalibrationProcessor(config, RunDirectory(tmp_path).create()).calibrate()
        assert exc.value.key == key


class TestTsvWriter:
    def test_render(self):
        text = TsvWriter().render(["name", "value", "flag"], [["a", 0.5, True], ["b", None, False], ["c", math.nan, 1]])
        assert text.splitlines() == ["name\tvalue\tflag", "a\t0.5\ttrue", "b\tNA\tfalse", "c\tNA\t1"]

    def test_row_width_must_match(self):
        with pytest.raises(ReportError):
            TsvWriter().render(["a", "b"], [[1]])

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "reports"
        blocker.write_text("", encoding="utf-8")
        with pytest.raises(ReportError, match="cannot write report"):
            TsvWriter().write(blocker / "fid.tsv", ["score"], [[1.0]])

    def test_write_creates_parent(self, tmp_path):
        path = TsvWriter().write(tmp_path / "reports" / "fid.tsv", ["score"], [[1.25]])
        assert path.read_text(encoding="utf-8") == "score\n1.25\n"


ABLATION_RUN = [
    "--image-size", "8", "--pretrain-size", "2000", "--train-size", "400", "--val-size", "8", "--test-size", "400",
    "--timesteps", "100", "--mixture", "cifar10", "--model-channels", "8,16", "--embedding-dim", "8",
    "--pretrain-steps", "400", "--pretrain-batch-size", "32", "--pretrain-warmup-steps", "20",
    "--steps", "100", "--batch-size", "64", "--microbatch-size", "32", "--augmult", "2", "--target-epsilon", "10",
    "--num-samples", "200", "--classifier-steps", "100", "--classifier-batch-size", "32", "--feature-dim", "16",
    "--ensemble-size", "5", "--repeats", "5",
]


@pytest.fixture(scope="module")
def ablation_summary(tmp_path_factory):
    out = tmp_path_factory.mktemp("ablation")
    config = resolve_config("ablate", overrides=ABLATION_RUN, out=str(out))
    processor = AblationProcessor(config, RunDirectory(out).create())
    rows = processor.run()
    processor.write(rows)
    return summarize(rows)


@pytest.mark.slow
class TestAblationDirections:
    """Mean-over-seed directions under one shared privacy budget."""

    def test_pretraining_beats_scratch(self, ablation_summary):
        assert ablation_summary[("pretraining", "pretrained", "accuracy")] >= ablation_summary[("pretraining", "scratch", "accuracy")]
        assert ablation_summary[("pretraining", "pretrained", "fid")] <= ablation_summary[("pretraining", "scratch", "fid")]

    def test_biased_timesteps_match_uniform(self, ablation_summary):
        biased = ablation_summary[("timesteps", "cifar10", "accuracy")]
        assert biased >= ablation_summary[("timesteps", "uniform", "accuracy")] - 0.005

    def test_more_synthetic_samples_help(self, ablation_summary):
        assert ablation_summary[("sample_size", "4n", "accuracy")] >= ablation_summary[("sample_size", "1n", "accuracy")]

    def test_ensembling_helps(self, ablation_summary):
        assert ablation_summary[("ensemble", "ensemble5", "accuracy")] >= ablation_summary[("ensemble", "single", "accuracy")]
