"""Heavy-tailed (nu = 1) mixture model with diagonal scales, fit by trimmed EM.

Three component densities are supported:

``paper_exact``
    omega_k / pi * |S_k|^(-1/2) / (1 + D^2): the simplified Cauchy-style
    pseudo-density used throughout by default. It is not normalized for d > 1.
``standard_t``
    the properly normalized d-dimensional Student-t with one degree of freedom.
``gaussian``
    diagonal Gaussian, used by the Gaussian-mixture ablation.

All per-component terms are computed in the log domain; ``D^2`` is always the
squared Mahalanobis distance under the diagonal scale matrix.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

SCALE_FLOOR = 1e-6
STARVED_MASS = 1e-12
LOG_PI = float(np.log(np.pi))


class DensityMode(str, enum.Enum):
    PAPER_EXACT = "paper_exact"
    STANDARD_T = "standard_t"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class MixtureParams:
    weights: np.ndarray
    prototypes: np.ndarray
    scales: np.ndarray
    density_mode: DensityMode = DensityMode.PAPER_EXACT

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.prototypes, dtype=np.float64))
        s = np.atleast_2d(np.asarray(self.scales, dtype=np.float64))
        if w.ndim != 1 or mu.shape != s.shape or mu.shape[0] != w.shape[0]:
            raise ValueError(
                f"inconsistent mixture shapes: weights {w.shape}, prototypes {mu.shape}, scales {s.shape}"
            )
        if np.any(s <= 0):
            raise ValueError("scale entries must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "prototypes", mu)
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "density_mode", DensityMode(self.density_mode))

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.prototypes.shape[1]


def mahalanobis_sq(z, prototype, scale) -> float:
    z, prototype, scale = (np.asarray(a, dtype=np.float64) for a in (z, prototype, scale))
    if z.shape != prototype.shape or z.shape != scale.shape:
        raise ValueError("z, prototype and scale must have equal shapes")
    if np.any(scale <= 0):
        raise ValueError("scale entries must be positive")
    return float(np.sum((z - prototype) ** 2 / scale))


def mahalanobis_sq_all(Z: np.ndarray, params: MixtureParams) -> np.ndarray:
    """Squared distances of every row of ``Z`` to every component, N x K."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[1] != params.d:
        raise ValueError(f"embedding width {Z.shape[1]} does not match mixture dimension {params.d}")
    diff = Z[:, None, :] - params.prototypes[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff / params.scales[None, :, :])


def _log_normalizers(params: MixtureParams) -> np.ndarray:
    d = params.d
    half_logdet = 0.5 * np.log(params.scales).sum(axis=1)
    with np.errstate(divide="ignore"):
        log_w = np.log(params.weights)
    mode = params.density_mode
    if mode is DensityMode.PAPER_EXACT:
        const = -LOG_PI
    elif mode is DensityMode.STANDARD_T:
        const = gammaln((1 + d) / 2) - gammaln(0.5) - 0.5 * d * LOG_PI
    else:
        const = -0.5 * d * np.log(2 * np.pi)
    return log_w + const - half_logdet


def _log_kernel(dsq: np.ndarray, params: MixtureParams) -> np.ndarray:
    mode = params.density_mode
    if mode is DensityMode.PAPER_EXACT:
        return -np.log1p(dsq)
    if mode is DensityMode.STANDARD_T:
        return -0.5 * (1 + params.d) * np.log1p(dsq)
    return -0.5 * dsq


def log_component_forces(Z: np.ndarray, params: MixtureParams, dsq: np.ndarray | None = None) -> np.ndarray:
    """log of omega_k * p_k(z_i), N x K."""
    if dsq is None:
        dsq = mahalanobis_sq_all(Z, params)
    return _log_normalizers(params)[None, :] + _log_kernel(dsq, params)


def component_forces(Z: np.ndarray, params: MixtureParams) -> np.ndarray:
    return np.exp(log_component_forces(Z, params))


def component_force(z, k: int, params: MixtureParams) -> float:
    if not 0 <= k < params.K:
        raise IndexError(f"component {k} out of range for K={params.K}")
    return float(component_forces(np.atleast_2d(z), params)[0, k])


def log_marginal_likelihood(Z: np.ndarray, params: MixtureParams) -> np.ndarray:
    return logsumexp(log_component_forces(Z, params), axis=1)


def marginal_likelihood(z, params: MixtureParams) -> float:
    return float(np.exp(log_marginal_likelihood(np.atleast_2d(z), params))[0])


def scale_factors(dsq: np.ndarray, params: MixtureParams, u_unsquared: bool = False) -> np.ndarray:
    """EM scale factors u_ik; also the coefficient of the gradient of
    -log p_k with respect to z (when ``u_unsquared`` is False)."""
    mode = params.density_mode
    if mode is DensityMode.GAUSSIAN:
        return np.ones_like(dsq)
    numer = 2.0 if mode is DensityMode.PAPER_EXACT else 1.0 + params.d
    dist = np.sqrt(dsq) if u_unsquared else dsq
    return numer / (1.0 + dist)


def e_step(
    Z: np.ndarray, params: MixtureParams, u_unsquared: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Responsibilities tau (rows sum to one) and scale factors u, both N x K."""
    dsq = mahalanobis_sq_all(Z, params)
    logf = log_component_forces(Z, params, dsq)
    tau = np.exp(logf - logsumexp(logf, axis=1, keepdims=True))
    return tau, scale_factors(dsq, params, u_unsquared)


def _restrict(kept, *arrays):
    if kept is None:
        return arrays
    kept = np.asarray(kept, dtype=np.int64)
    return tuple(a[kept] for a in arrays)


def m_step(
    Z: np.ndarray,
    tau: np.ndarray,
    u: np.ndarray,
    kept=None,
    density_mode: DensityMode = DensityMode.PAPER_EXACT,
    reseed: bool = True,
) -> MixtureParams:
    """Closed-form updates of weights, prototypes and diagonal scales over the
    kept rows.

    With ``reseed``, a component whose responsibility mass falls below
    ``STARVED_MASS`` is moved to the kept point least likely under the
    remaining components. Without it the component keeps its (near) zero
    weight and unit scales.
    """
    Z, tau, u = _restrict(kept, np.asarray(Z, dtype=np.float64), tau, u)
    n = Z.shape[0]
    if n == 0:
        raise ValueError("m_step needs at least one kept row")

    mass = tau.sum(axis=0)
    tu = tau * u
    tu_mass = tu.sum(axis=0)
    starved = (mass < STARVED_MASS) | (tu_mass <= 0)
    safe_tu = np.where(starved, 1.0, tu_mass)
    safe_mass = np.where(starved, 1.0, mass)

    weights = mass / n
    prototypes = (tu.T @ Z) / safe_tu[:, None]
    sq = (Z[:, None, :] - prototypes[None, :, :]) ** 2
    scales = np.einsum("nk,nkd->kd", tu, sq) / safe_mass[:, None]
    scales = np.maximum(scales, SCALE_FLOOR)
    scales[starved] = 1.0

    if reseed and np.any(starved):
        global_var = np.maximum(Z.var(axis=0), SCALE_FLOOR)
        used = set()
        for k in np.flatnonzero(starved):
            alive = ~starved
            if np.any(alive):
                others = MixtureParams(weights[alive] / weights[alive].sum(), prototypes[alive], scales[alive], density_mode)
                ll = log_marginal_likelihood(Z, others)
            else:
                ll = np.zeros(n)
            order = [i for i in np.argsort(ll, kind="stable") if i not in used]
            pick = order[0] if order else 0
            used.add(pick)
            prototypes[k] = Z[pick]
            scales[k] = global_var
            weights[k] = 1.0 / n
            starved[k] = False
        weights = weights / weights.sum()

    return MixtureParams(weights, prototypes, scales, density_mode)


def trimmed_log_likelihood(Z: np.ndarray, params: MixtureParams, kept=None) -> float:
    """Sum of log marginal likelihoods over the kept rows (all rows when
    ``kept`` is None)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if kept is not None:
        kept = np.asarray(kept, dtype=np.int64)
        if kept.size == 0:
            return 0.0
        Z = Z[kept]
    return float(np.sum(log_marginal_likelihood(Z, params)))


def init_mixture(
    Z: np.ndarray,
    K: int,
    seed: int = 0,
    density_mode: DensityMode = DensityMode.PAPER_EXACT,
) -> MixtureParams:
    """k-means++ style seeding: prototypes are data points drawn with
    probability proportional to squared distance from the nearest chosen one."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    N = Z.shape[0]
    if K < 1:
        raise ValueError("K must be >= 1")
    if N < K:
        raise ValueError(f"need at least K={K} points to initialise, got {N}")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(N))]
    closest = np.sum((Z - Z[chosen[0]]) ** 2, axis=1)
    for _ in range(1, K):
        p = closest.copy()
        p[chosen] = 0.0
        total = p.sum()
        if total > 0:
            idx = int(rng.choice(N, p=p / total))
        else:
            # remaining points duplicate chosen ones
            free = np.setdiff1d(np.arange(N), chosen)
            idx = int(rng.choice(free))
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((Z - Z[idx]) ** 2, axis=1))

    var = np.maximum(Z.var(axis=0), SCALE_FLOOR)
    return MixtureParams(
        np.full(K, 1.0 / K),
        Z[chosen].copy(),
        np.tile(var, (K, 1)),
        density_mode,
    )


def fit_em(
    Z: np.ndarray,
    K: int,
    kept,
    init: MixtureParams,
    tol: float = 1e-3,
    max_iter: int = 100,
    u_unsquared: bool = False,
    history: list | None = None,
) -> tuple[MixtureParams, int, float]:
    """Alternate E and M steps on the kept rows until the trimmed
    log-likelihood changes by at most ``tol``.

    Returns ``(params, iterations, J)``. If ``history`` is given, the
    likelihood before the first step and after every step is appended to it.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    kept = np.arange(Z.shape[0]) if kept is None else np.asarray(kept, dtype=np.int64)
    if kept.size == 0:
        raise ValueError("fit_em needs a non-empty kept set")
    if init.K != K:
        raise ValueError(f"init has {init.K} components, expected {K}")
    Zk = Z[kept]
    params = init
    J = trimmed_log_likelihood(Zk, params)
    if history is not None:
        history.append(J)
    it = 0
    while it < max_iter:
        it += 1
        tau, u = e_step(Zk, params, u_unsquared)
        params = m_step(Zk, tau, u, density_mode=params.density_mode)
        J_old, J = J, trimmed_log_likelihood(Zk, params)
        if history is not None:
            history.append(J)
        if abs(J - J_old) <= tol:
            break
    return params, it, J


def with_mode(params: MixtureParams, mode: DensityMode) -> MixtureParams:
    return replace(params, density_mode=DensityMode(mode))
