"""Symmetric two-layer ReLU autoencoder with hand-written backprop and Adam.

The training loss for a batch of kept rows is

    loss = -mean_i log p(z_i) + mean_i ||x_i - x_hat_i||^2

with ``p`` the mixture marginal likelihood of the embedding. The mixture is a
constant during these updates.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import logsumexp

from .mixture import (
    MixtureParams,
    log_component_forces,
    mahalanobis_sq_all,
    scale_factors,
)

PARAM_NAMES = ("enc_w1", "enc_b1", "enc_w2", "enc_b2", "dec_w1", "dec_b1", "dec_w2", "dec_b2")


@dataclass
class EncoderParams:
    enc_w1: np.ndarray
    enc_b1: np.ndarray
    enc_w2: np.ndarray
    enc_b2: np.ndarray
    dec_w1: np.ndarray
    dec_b1: np.ndarray
    dec_w2: np.ndarray
    dec_b2: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        """(D, H, d)"""
        return self.enc_w1.shape[0], self.enc_w1.shape[1], self.enc_w2.shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]

    def map(self, fn, *others: EncoderParams) -> EncoderParams:
        return EncoderParams(*(fn(a, *rest) for a, *rest in zip(self.arrays(), *(o.arrays() for o in others))))

    def copy(self) -> EncoderParams:
        return self.map(np.copy)

    def zeros_like(self) -> EncoderParams:
        return self.map(np.zeros_like)


# gradients share the parameter layout
Gradients = EncoderParams


@dataclass
class AdamState:
    first_moment: EncoderParams
    second_moment: EncoderParams
    step_count: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: EncoderParams, lr: float = 1e-4, **kw) -> AdamState:
        return cls(params.zeros_like(), params.zeros_like(), 0, lr, **kw)


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_encoder(D: int, H: int, d: int, seed: int = 0) -> EncoderParams:
    if min(D, H, d) < 1:
        raise ValueError(f"D, H, d must all be >= 1, got {(D, H, d)}")
    rng = np.random.default_rng(seed)
    return EncoderParams(
        _glorot(rng, D, H), np.zeros(H),
        _glorot(rng, H, d), np.zeros(d),
        _glorot(rng, d, H), np.zeros(H),
        _glorot(rng, H, D), np.zeros(D),
    )


def identity_encoder(D: int) -> EncoderParams:
    """Exact identity in both directions through the ReLU layers, using
    relu(x) - relu(-x) = x with H = 2D."""
    eye = np.eye(D)
    up = np.hstack([eye, -eye])
    down = np.vstack([eye, -eye])
    return EncoderParams(
        up.copy(), np.zeros(2 * D), down.copy(), np.zeros(D),
        up.copy(), np.zeros(2 * D), down.copy(), np.zeros(D),
    )


def _check_input(params: EncoderParams, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.dims[0]:
        raise ValueError(f"input has {X.shape[1]} columns, encoder expects {params.dims[0]}")
    return X


def encode(params: EncoderParams, X: np.ndarray) -> np.ndarray:
    X = _check_input(params, X)
    return np.maximum(X @ params.enc_w1 + params.enc_b1, 0.0) @ params.enc_w2 + params.enc_b2


def forward(params: EncoderParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Returns embeddings, reconstructions and the mean squared row error."""
    X = _check_input(params, X)
    Z = encode(params, X)
    X_hat = np.maximum(Z @ params.dec_w1 + params.dec_b1, 0.0) @ params.dec_w2 + params.dec_b2
    recon = float(np.mean(np.sum((X_hat - X) ** 2, axis=1)))
    return Z, X_hat, recon


def likelihood_term(Z: np.ndarray, mixture: MixtureParams) -> float:
    """-mean log p(z_i) under the frozen mixture."""
    if Z.shape[1] != mixture.d:
        raise ValueError(f"mixture dimension {mixture.d} does not match latent width {Z.shape[1]}")
    return float(-np.mean(logsumexp(log_component_forces(Z, mixture), axis=1)))


def joint_loss_terms(params: EncoderParams, mixture: MixtureParams, X_kept: np.ndarray) -> tuple[float, float]:
    """(likelihood term, reconstruction term)."""
    Z, _, recon = forward(params, X_kept)
    return likelihood_term(Z, mixture), recon


def joint_loss(params: EncoderParams, mixture: MixtureParams, X_kept: np.ndarray) -> float:
    lik, recon = joint_loss_terms(params, mixture, X_kept)
    return lik + recon


def joint_loss_gradient(
    params: EncoderParams,
    mixture: MixtureParams,
    X_kept: np.ndarray,
    likelihood_weight: float = 1.0,
) -> tuple[Gradients, float]:
    """Analytic gradient of ``likelihood_weight * lik + recon``.

    d(-log p)/dz_i = sum_k tau_ik u_ik (z_i - mu_k) / s_k, where u is the
    squared-distance scale factor of the density mode.
    """
    X = _check_input(params, X_kept)
    B = X.shape[0]
    if mixture.d != params.dims[2]:
        raise ValueError(f"mixture dimension {mixture.d} does not match latent width {params.dims[2]}")

    h1 = X @ params.enc_w1 + params.enc_b1
    a1 = np.maximum(h1, 0.0)
    Z = a1 @ params.enc_w2 + params.enc_b2
    h2 = Z @ params.dec_w1 + params.dec_b1
    a2 = np.maximum(h2, 0.0)
    X_hat = a2 @ params.dec_w2 + params.dec_b2

    resid = X_hat - X
    recon = float(np.mean(np.sum(resid**2, axis=1)))
    loss = recon

    g_xhat = (2.0 / B) * resid
    g_dec_w2 = a2.T @ g_xhat
    g_dec_b2 = g_xhat.sum(axis=0)
    g_h2 = (g_xhat @ params.dec_w2.T) * (h2 > 0)
    g_dec_w1 = Z.T @ g_h2
    g_dec_b1 = g_h2.sum(axis=0)
    g_z = g_h2 @ params.dec_w1.T

    if likelihood_weight != 0.0:
        dsq = mahalanobis_sq_all(Z, mixture)
        logf = log_component_forces(Z, mixture, dsq)
        log_p = logsumexp(logf, axis=1, keepdims=True)
        tau = np.exp(logf - log_p)
        coef = tau * scale_factors(dsq, mixture)
        diff = Z[:, None, :] - mixture.prototypes[None, :, :]
        g_lik = np.einsum("nk,nkd->nd", coef, diff / mixture.scales[None, :, :])
        g_z = g_z + (likelihood_weight / B) * g_lik
        loss += likelihood_weight * float(-np.mean(log_p))

    g_enc_w2 = a1.T @ g_z
    g_enc_b2 = g_z.sum(axis=0)
    g_h1 = (g_z @ params.enc_w2.T) * (h1 > 0)
    g_enc_w1 = X.T @ g_h1
    g_enc_b1 = g_h1.sum(axis=0)

    grads = EncoderParams(g_enc_w1, g_enc_b1, g_enc_w2, g_enc_b2, g_dec_w1, g_dec_b1, g_dec_w2, g_dec_b2)
    return grads, loss


def adam_step(params: EncoderParams, grads: Gradients, state: AdamState) -> tuple[EncoderParams, AdamState]:
    b1, b2 = state.beta1, state.beta2
    t = state.step_count + 1
    m = state.first_moment.map(lambda m, g: b1 * m + (1 - b1) * g, grads)
    v = state.second_moment.map(lambda v, g: b2 * v + (1 - b2) * g * g, grads)
    c1, c2 = 1 - b1**t, 1 - b2**t
    new = params.map(
        lambda p, m_, v_: p - state.lr * (m_ / c1) / (np.sqrt(v_ / c2) + state.epsilon), m, v
    )
    return new, AdamState(m, v, t, state.lr, b1, b2, state.epsilon)


def default_batch_size(n: int) -> int:
    return n if n <= 2048 else 256


def train_epochs(
    params: EncoderParams,
    mixture: MixtureParams,
    X_kept: np.ndarray,
    epochs: int,
    batch_size: int,
    state: AdamState,
    seed: int = 0,
    likelihood_weight: float = 1.0,
) -> tuple[EncoderParams, AdamState, float]:
    """Minibatch Adam on the joint loss; batch order is reshuffled each epoch
    from ``(seed, epoch)``. Returns the full-data loss after the last epoch."""
    X = _check_input(params, X_kept)
    n = X.shape[0]
    if n == 0:
        raise ValueError("train_epochs needs at least one row")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    for epoch in range(epochs):
        order = np.random.default_rng([seed, epoch]).permutation(n)
        for start in range(0, n, batch_size):
            batch = X[order[start:start + batch_size]]
            grads, _ = joint_loss_gradient(params, mixture, batch, likelihood_weight)
            params, state = adam_step(params, grads, state)
    lik, recon = joint_loss_terms(params, mixture, X)
    return params, state, likelihood_weight * lik + recon
