"""Anomaly scores from a fitted mixture and the trimming (outlier) selection.

Each component pulls on a sample with a "force" equal to its weighted
density term. The scalar score is the reciprocal of the summed magnitudes;
the vector score is the reciprocal of the norm of the resultant when every
force points from the sample towards its prototype, so opposing pulls cancel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .mixture import MixtureParams, component_forces, log_marginal_likelihood

DIRECTION_EPS = 1e-12
NORM_FLOOR = 1e-12


class ScoreMode(str, enum.Enum):
    SCALAR = "scalar"
    VECTOR = "vector"


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray
    mode: ScoreMode

    def __len__(self):
        return self.scores.shape[0]


@dataclass(frozen=True)
class OutlierSet:
    removed: np.ndarray
    kept: np.ndarray
    fraction: float


def _scalar_scores(Z: np.ndarray, params: MixtureParams) -> np.ndarray:
    return 1.0 / np.maximum(np.exp(log_marginal_likelihood(Z, params)), NORM_FLOOR)


def _vector_scores(Z: np.ndarray, params: MixtureParams) -> np.ndarray:
    forces = component_forces(Z, params)
    diff = params.prototypes[None, :, :] - Z[:, None, :]
    dist = np.sqrt(np.einsum("nkd,nkd->nk", diff, diff))
    live = dist >= DIRECTION_EPS
    if params.K == 1:
        # a lone force has norm equal to its magnitude; skip the rounding of |r_hat|
        norm = np.where(live[:, 0], forces[:, 0], 0.0)
    else:
        weight = np.where(live, forces / np.where(live, dist, 1.0), 0.0)
        net = np.einsum("nk,nkd->nd", weight, diff)
        norm = np.sqrt(np.einsum("nd,nd->n", net, net))
    return 1.0 / np.maximum(norm, NORM_FLOOR)


def score_all(Z: np.ndarray, params: MixtureParams, mode: ScoreMode | str = ScoreMode.VECTOR) -> ScoreVector:
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    mode = ScoreMode(mode)
    fn = _vector_scores if mode is ScoreMode.VECTOR else _scalar_scores
    return ScoreVector(fn(Z, params), mode)


def scalar_score(z, params: MixtureParams) -> float:
    return float(_scalar_scores(np.atleast_2d(np.asarray(z, dtype=np.float64)), params)[0])


def vector_score(z, params: MixtureParams) -> float:
    return float(_vector_scores(np.atleast_2d(np.asarray(z, dtype=np.float64)), params)[0])


def n_trimmed(n: int, fraction: float) -> int:
    return int(math.floor(n * fraction))


def select_outliers(scores: ScoreVector | np.ndarray, fraction: float) -> OutlierSet:
    """Mark the floor(N * fraction) highest-scoring rows as outliers; ties
    go to the lower index."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"outlier fraction must be in [0, 1), got {fraction}")
    s = scores.scores if isinstance(scores, ScoreVector) else np.asarray(scores, dtype=np.float64)
    n = s.shape[0]
    m = n_trimmed(n, fraction)
    order = np.lexsort((np.arange(n), -s))
    removed = np.sort(order[:m])
    kept = np.sort(order[m:])
    return OutlierSet(removed, kept, fraction)
