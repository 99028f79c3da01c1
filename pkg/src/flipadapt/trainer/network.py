"""Fully connected semantic autoencoder trained through a relaxed BSC layer.

Forward path for a batch ``u`` of shape ``(batch, M)``::

    encoder MLP -> ReLU6 -> B-bit quantizer -> bits (N*B, LSB first per feature)
    -> relaxed BSC with per-bit flip probabilities -> soft dequantization
    -> decoder MLP -> u_hat

Gradients are exact everywhere except across the hard quantizer, where a
straight-through rule is used: every bit of a feature is given derivative
``1 / (v_max - v_min)`` with respect to that feature.  With an error-free
channel this makes ``dL/dv`` equal ``dL/dq_hat``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import bsc
from ..quantizer import QuantizerSpec, bits_of, quantize

RELU6_CAP = 6.0


class StaleCacheError(RuntimeError):
    pass


def init_layers(widths, rng: np.random.Generator, last_bias: float = 0.0):
    """He-initialised ``[(W, b), ...]`` for consecutive widths."""
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        b = np.zeros(fan_out)
        if i == len(widths) - 2:
            b += last_bias
        layers.append((W, b))
    return layers


def _mlp_forward(layers, x):
    """ReLU hidden layers, linear output.  Returns output and per-layer inputs/pre-activations."""
    inputs, pre = [], []
    h = x
    for i, (W, b) in enumerate(layers):
        inputs.append(h)
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
    return h, inputs, pre


def _mlp_backward(layers, inputs, pre, d_out):
    grads = [None] * len(layers)
    d = d_out
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        if i < len(layers) - 1:
            d = d * (pre[i] > 0.0)
        grads[i] = (inputs[i].T @ d, d.sum(axis=0))
        d = d @ W.T
    return grads, d


@dataclass
class Cache:
    version: int
    u: np.ndarray
    enc_inputs: list
    enc_pre: list
    z: np.ndarray
    bits: np.ndarray
    e_tilde: np.ndarray
    noise_u: np.ndarray | None
    mu: np.ndarray
    dec_inputs: list
    dec_pre: list
    u_hat: np.ndarray


class SemanticAutoencoder:
    """Encoder/decoder MLPs plus raw flip parameters of the relaxed channel."""

    def __init__(self, encoder, decoder, raw_mu, quantizer: QuantizerSpec, tau: float = 1.0):
        self.encoder = [(np.array(W, dtype=float), np.array(b, dtype=float)) for W, b in encoder]
        self.decoder = [(np.array(W, dtype=float), np.array(b, dtype=float)) for W, b in decoder]
        self.raw_mu = np.array(raw_mu, dtype=float).reshape(-1)
        self.quantizer = quantizer
        self.tau = float(tau)
        self.version = 0
        n_feat = self.encoder[-1][0].shape[1]
        if self.decoder[0][0].shape[0] != n_feat:
            raise ValueError("encoder output width must equal decoder input width")
        if self.raw_mu.size != n_feat * quantizer.B:
            raise ValueError(f"need {n_feat * quantizer.B} flip parameters, got {self.raw_mu.size}")

    @property
    def n_features(self) -> int:
        return self.encoder[-1][0].shape[1]

    @property
    def n_bits(self) -> int:
        return self.n_features * self.quantizer.B

    @property
    def mu(self) -> np.ndarray:
        return bsc.flip_probabilities(self.raw_mu)

    # --- transmitter / receiver halves, used at inference ---

    def features(self, u) -> np.ndarray:
        z, _, _ = _mlp_forward(self.encoder, np.atleast_2d(u))
        return np.clip(z, 0.0, RELU6_CAP)

    def encode_bits(self, u) -> np.ndarray:
        """Hard bit stream ``(batch, N*B)`` of the quantized features."""
        v = self.features(u)
        return bits_of(quantize(v, self.quantizer), self.quantizer).reshape(v.shape[0], -1)

    def decode_soft_bits(self, bits) -> np.ndarray:
        bits = np.atleast_2d(np.asarray(bits, dtype=float))
        q = bits.reshape(bits.shape[0], self.n_features, self.quantizer.B) @ self.quantizer.weights
        u_hat, _, _ = _mlp_forward(self.decoder, q + self.quantizer.v_min)
        return u_hat

    # --- training ---

    def forward_train(self, u, noise_u=None, e_tilde=None) -> tuple[np.ndarray, Cache]:
        """Run the relaxed training path.

        ``noise_u`` holds one uniform draw per bit (same shape as the bit
        matrix).  Passing ``e_tilde`` instead fixes the channel errors, which
        the error-free check (all ones) relies on.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        z, enc_inputs, enc_pre = _mlp_forward(self.encoder, u)
        v = np.clip(z, 0.0, RELU6_CAP)
        bits = bits_of(quantize(v, self.quantizer), self.quantizer).reshape(u.shape[0], -1)
        mu = self.mu
        if e_tilde is None:
            if noise_u is None or np.shape(noise_u) != bits.shape:
                raise ValueError(f"noise_u must have shape {bits.shape}")
            e_tilde = bsc.relax_error(mu, noise_u, self.tau)
        else:
            e_tilde = np.broadcast_to(np.asarray(e_tilde, dtype=float), bits.shape)
            noise_u = None
        b_hat = bsc.transmit_relaxed(bits, e_tilde)
        q_hat = b_hat.reshape(u.shape[0], self.n_features, -1) @ self.quantizer.weights
        q_hat = q_hat + self.quantizer.v_min
        u_hat, dec_inputs, dec_pre = _mlp_forward(self.decoder, q_hat)
        cache = Cache(
            self.version, u, enc_inputs, enc_pre, z, bits, np.asarray(e_tilde),
            None if noise_u is None else np.asarray(noise_u), mu, dec_inputs, dec_pre, u_hat,
        )
        return u_hat, cache

    def backward(self, cache: Cache, d_u_hat, d_mu=None) -> dict:
        """Gradients for ``encoder``, ``decoder`` and ``raw_mu``.

        ``d_u_hat`` is the loss gradient at the decoder output; ``d_mu`` an
        optional direct gradient on the flip probabilities (regulariser).
        """
        if cache.version != self.version:
            raise StaleCacheError("cache was produced before the last parameter update")
        batch = cache.u.shape[0]
        dec_grads, d_q = _mlp_backward(self.decoder, cache.dec_inputs, cache.dec_pre, d_u_hat)

        B = self.quantizer.B
        d_bhat = (d_q[:, :, None] * self.quantizer.weights).reshape(batch, -1)

        d_mu_total = np.zeros_like(cache.mu) if d_mu is None else np.array(d_mu, dtype=float)
        if cache.noise_u is not None:
            d_e = d_bhat * (cache.bits - 0.5)
            d_mu_total = d_mu_total + np.sum(
                d_e * bsc.relax_error_grad(cache.mu, cache.noise_u, self.tau), axis=0
            )
        d_raw = d_mu_total * cache.mu * (1.0 - 2.0 * cache.mu)

        # straight-through across quantize + bit mapping
        d_bits = d_bhat * cache.e_tilde
        span = self.quantizer.v_max - self.quantizer.v_min
        d_v = d_bits.reshape(batch, self.n_features, B).sum(axis=2) / span
        d_z = d_v * ((cache.z > 0.0) & (cache.z < RELU6_CAP))
        enc_grads, _ = _mlp_backward(self.encoder, cache.enc_inputs, cache.enc_pre, d_z)
        return {"encoder": enc_grads, "decoder": dec_grads, "raw_mu": d_raw}

    def parameters(self) -> dict:
        return {"encoder": self.encoder, "decoder": self.decoder, "raw_mu": self.raw_mu}

    def set_parameters(self, params: dict) -> None:
        self.encoder = params["encoder"]
        self.decoder = params["decoder"]
        self.raw_mu = params["raw_mu"]
        self.version += 1


# --- losses ---


def mse(u, u_hat) -> float:
    """Per-sample squared error divided by the input dimension, averaged over the batch."""
    u = np.atleast_2d(u)
    return float(np.mean(np.sum((u - np.atleast_2d(u_hat)) ** 2, axis=1) / u.shape[1]))


def mse_grad(u, u_hat) -> np.ndarray:
    u = np.atleast_2d(u)
    return 2.0 * (np.atleast_2d(u_hat) - u) / (u.shape[0] * u.shape[1])


def l2_regularizer(mu) -> tuple[float, np.ndarray]:
    """Mean of ``(1/2 - mu_n)^2`` and its gradient."""
    mu = np.asarray(mu, dtype=float)
    return float(np.mean((0.5 - mu) ** 2)), -2.0 * (0.5 - mu) / mu.size


def target_regularizer(mu, target_mu: float) -> tuple[float, np.ndarray]:
    """Mean of ``(target - mu_n)^2`` and its gradient."""
    mu = np.asarray(mu, dtype=float)
    return float(np.mean((target_mu - mu) ** 2)), -2.0 * (target_mu - mu) / mu.size


def loss(u, u_hat, mu, lam: float) -> float:
    """MSE plus ``lam`` times the L2 pull of every flip probability towards 1/2."""
    if lam < 0:
        raise ValueError("regularisation weight must be non-negative")
    return mse(u, u_hat) + lam * l2_regularizer(mu)[0]


def target_loss(u, u_hat, mu, lam: float, target_mu: float) -> float:
    if lam < 0:
        raise ValueError("regularisation weight must be non-negative")
    return mse(u, u_hat) + lam * target_regularizer(mu, target_mu)[0]
