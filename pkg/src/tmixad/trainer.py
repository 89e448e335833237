"""Alternating optimisation of the autoencoder and the trimmed mixture.

Each outer iteration (a) trims the highest-scoring training rows (skipped on
the first pass), (b) trains the encoder on the kept rows against the current
mixture, (c) re-embeds the kept rows and refits the mixture by EM, warm
started from the previous mixture, and (d) rescores every training row.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dataset import Dataset, DataError, StandardizationStats, fit_standardization
from .encoder import (
    AdamState,
    EncoderParams,
    default_batch_size,
    encode,
    identity_encoder,
    init_encoder,
    joint_loss_terms,
    train_epochs,
)
from .mixture import DensityMode, MixtureParams, fit_em, init_mixture
from .scoring import ScoreMode, ScoreVector, n_trimmed, score_all, select_outliers

logger = logging.getLogger(__name__)

ABLATIONS = ("gaussian_mixture", "no_joint_likelihood", "no_indicator")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    K: int = 10
    l: float = 0.01
    em_tol: float = 1e-3
    em_max_iter: int = 100
    epochs: int = 100
    lr: float = 1e-4
    hidden: int = 128
    latent: int | None = None  # None -> min(D, 8)
    outer_iters: int = 10
    seed: int = 0
    density_mode: DensityMode = DensityMode.PAPER_EXACT
    score_mode: ScoreMode = ScoreMode.VECTOR
    u_unsquared: bool = False
    encoder_init: str = "random"  # or "identity"
    batch_size: int | None = None  # None -> full batch up to 2048 rows, else 256
    gaussian_mixture: bool = False
    no_joint_likelihood: bool = False
    no_indicator: bool = False

    def __post_init__(self):
        try:
            self.density_mode = DensityMode(self.density_mode)
            self.score_mode = ScoreMode(self.score_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0.0 <= self.l < 1.0:
            raise ConfigError(f"l must be in [0, 1), got {self.l}")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        for name in ("em_max_iter", "epochs", "outer_iters", "hidden"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.latent is not None and self.latent < 1:
            raise ConfigError("latent must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.encoder_init not in ("random", "identity"):
            raise ConfigError(f"encoder_init must be 'random' or 'identity', got {self.encoder_init!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["density_mode"] = self.density_mode.value
        out["score_mode"] = self.score_mode.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class EffectiveBehavior:
    density_mode: DensityMode
    likelihood_weight: float
    trim_fraction: float


def apply_ablation(config: TrainConfig) -> EffectiveBehavior:
    active = [name for name in ABLATIONS if getattr(config, name)]
    if len(active) > 1:
        raise ConfigError(f"at most one ablation may be set, got {active}")
    return EffectiveBehavior(
        DensityMode.GAUSSIAN if config.gaussian_mixture else config.density_mode,
        0.0 if config.no_joint_likelihood else 1.0,
        0.0 if config.no_indicator else config.l,
    )


@dataclass
class Model:
    encoder: EncoderParams
    mixture: MixtureParams
    standardization: StandardizationStats
    config: TrainConfig
    history: list[dict] = field(default_factory=list, compare=False)
    train_scores: np.ndarray | None = field(default=None, compare=False)

    def embed(self, X: np.ndarray) -> np.ndarray:
        return encode(self.encoder, self.standardization.apply(X))


def _latent_width(config: TrainConfig, D: int) -> int:
    return config.latent if config.latent is not None else min(D, 8)


def fit(train: Dataset, config: TrainConfig) -> Model:
    behavior = apply_ablation(config)
    N, D = train.n, train.d
    if N < config.K:
        raise DataError(f"need at least K={config.K} training rows, got {N}")
    if N - n_trimmed(N, behavior.trim_fraction) < 1:
        raise DataError("outlier fraction leaves no kept rows")

    stats = fit_standardization(train.features)
    X = stats.apply(train.features)

    if config.encoder_init == "identity":
        enc = identity_encoder(D)
    else:
        enc = init_encoder(D, config.hidden, _latent_width(config, D), config.seed)
    adam = AdamState.for_params(enc, lr=config.lr)
    mixture = init_mixture(encode(enc, X), config.K, config.seed, behavior.density_mode)

    history: list[dict] = []
    scores: ScoreVector | None = None
    all_rows = np.arange(N)
    for i in range(1, config.outer_iters + 1):
        if i == 1 or scores is None:
            kept = all_rows
        else:
            kept = select_outliers(scores, behavior.trim_fraction).kept
        Xk = X[kept]

        batch = config.batch_size or default_batch_size(Xk.shape[0])
        enc, adam, loss = train_epochs(
            enc, mixture, Xk, config.epochs, batch, adam,
            seed=config.seed * 1_000_003 + i,
            likelihood_weight=behavior.likelihood_weight,
        )
        mixture, em_iters, J = fit_em(
            encode(enc, Xk), config.K, None, mixture,
            tol=config.em_tol, max_iter=config.em_max_iter, u_unsquared=config.u_unsquared,
        )
        scores = score_all(encode(enc, X), mixture, config.score_mode)

        lik, recon = joint_loss_terms(enc, mixture, Xk)
        record = {
            "iteration": i,
            "J": J,
            "joint_loss": behavior.likelihood_weight * lik + recon,
            "trimmed_count": int(N - kept.size),
            "em_iters": em_iters,
        }
        history.append(record)
        logger.info("outer iteration %d: %s", i, record)

    if scores is None:
        scores = score_all(encode(enc, X), mixture, config.score_mode)
    return Model(enc, mixture, stats, config, history, scores.scores)


def score_inductive(model: Model, test: Dataset | np.ndarray, mode: ScoreMode | str | None = None) -> ScoreVector:
    X = test.features if isinstance(test, Dataset) else np.atleast_2d(np.asarray(test, dtype=np.float64))
    if X.shape[1] != model.standardization.mean.shape[0]:
        raise DataError(
            f"dimension mismatch: data has {X.shape[1]} columns, model expects {model.standardization.mean.shape[0]}"
        )
    return score_all(model.embed(X), model.mixture, mode or model.config.score_mode)

