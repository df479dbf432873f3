"""Configuration constants."""

# Diffusion process
DEFAULT_TIMESTEPS = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02

# Timestep mixtures: (weights, component bounds) on a T=1000 grid
TIMESTEP_MIXTURE_PRESETS = {
    "uniform": ((1.0,), ((0, 1000),)),
    "imagenet32": ((0.03, 0.77, 0.2), ((0, 30), (30, 800), (800, 1000))),
    "mnist": ((0.05, 0.9, 0.05), ((0, 200), (200, 800), (800, 1000))),
    "cifar10": ((0.015, 0.785, 0.2), ((0, 30), (30, 600), (600, 1000))),
    "camelyon17": ((0.015, 0.785, 0.2), ((0, 30), (30, 600), (600, 1000))),
}
DEFAULT_TIMESTEP_MIXTURE = "cifar10"

# Denoiser architecture
DEFAULT_MODEL_KIND = "conv"
DEFAULT_MODEL_CHANNELS = (32, 32)
DEFAULT_EMBEDDING_DIM = 32

# DP training
DEFAULT_CLIP_NORM = 1e-3
DEFAULT_BATCH_SIZE = 256
DEFAULT_MICROBATCH_SIZE = 32
DEFAULT_STEPS = 200
DEFAULT_AUGMULT = 16
DEFAULT_MAX_SHIFT = 2
DEFAULT_OPTIMIZER = "dp-adam"
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_ADAM_BETA1 = 0.9
DEFAULT_ADAM_BETA2 = 0.999
DEFAULT_ADAM_EPS = 1e-8
DEFAULT_EMA_DECAY = 0.999  # 0.9999 converges too slowly for a few hundred steps
PRETRAIN_STEPS = 2000
PRETRAIN_BATCH_SIZE = 128
PRETRAIN_WARMUP_STEPS = 100

# Privacy accounting
RDP_ORDERS = tuple(range(2, 257))
SIGMA_BRACKET = (0.3, 100.0)
CALIBRATION_RELATIVE_TOLERANCE = 1e-3
DEFAULT_TARGET_EPSILON = 10.0

# Toy domains
TOY_IMAGE_SIZE = 16
TOY_CHANNELS = 1
TOY_CLASSES = ("disc", "square", "cross", "triangle")
TOY_PRETRAIN_SIZE = 50_000
TOY_FINETUNE_SIZES = {"train": 4000, "val": 1000, "test": 1000}
TOY_PRETRAIN_THICKNESS = (1.0, 1.8)
TOY_FINETUNE_THICKNESS = (2.0, 3.0)
TOY_JITTER = 2.0

# Evaluation
FEATURE_DIM = 64
FID_REGULARIZATION = 1e-6
DISCRIMINATOR_MIN_ACCURACY = 0.9
ENSEMBLE_SIZE = 5
CLASSIFIER_STEPS = 300
CLASSIFIER_BATCH_SIZE = 128
CLASSIFIER_LEARNING_RATE = 0.05
CLASSIFIER_MOMENTUM = 0.9

# Model-selection grid: architecture -> (learning rates, weight decays)
MODEL_SELECTION_GRID = {
    "conv-small": ((0.01, 0.03, 0.1), (0.0, 1e-3)),
    "conv-wide": ((0.01, 0.03, 0.1), (0.0, 1e-3)),
}

# Run directory layout and report files
RUN_SUBDIRS = ("checkpoints", "samples", "logs", "reports")
RESOLVED_CONFIG_NAME = "config.resolved"
FID_REPORT = "fid.tsv"
DOWNSTREAM_REPORT = "downstream.tsv"
SELECTION_REPORT = "selection.tsv"
ABLATION_REPORT = "ablation.tsv"
CALIBRATION_REPORT = "calibration.txt"
TRAIN_LOG_NAME = "train.jsonl"

# Concurrency
THREADS_ENV_VAR = "DPDM_THREADS"
