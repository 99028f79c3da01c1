"""Regularisation ladder: K independent trainings with increasing weight on the flip-probability pull."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import bsc
from ..quantizer import QuantizerSpec
from . import network
from .network import SemanticAutoencoder
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

MU_INIT_RANGE = (0.01, 0.49)
L2 = "l2"
TARGET = "target"


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lambdas: tuple = (1e-6, 1e-3, 1e-2)
    feature_dim: int = 8
    encoder_hidden: tuple = (64,)
    decoder_hidden: tuple = (64,)
    tau: float = 1.0
    tau_final: float | None = None  # linear anneal target; None keeps tau fixed
    epochs: int = 60
    batch_size: int = 16
    lr_model: float = 1e-3
    lr_mu: float = 1e-3
    seed: int = 0
    quantizer: QuantizerSpec = field(default_factory=QuantizerSpec)
    regularizer: str = L2
    target_mu: float | None = None
    trace: bool = True

    def __post_init__(self):
        self.lambdas = tuple(float(x) for x in self.lambdas)
        if not self.lambdas:
            raise ValueError("the ladder needs at least one lambda")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise ValueError("lambdas must be strictly ascending")
        if any(x < 0 for x in self.lambdas):
            raise ValueError("lambdas must be non-negative")
        if not (self.lr_model > 0 and self.lr_mu >= 0):
            raise ValueError("learning rates must be positive (mu rate may be zero)")
        if self.regularizer not in (L2, TARGET):
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.regularizer == TARGET and self.target_mu is None:
            raise ValueError("target regularisation needs target_mu")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be positive")

    @property
    def K(self) -> int:
        return len(self.lambdas)


@dataclass
class BundleEntry:
    encoder: list
    decoder: list
    mu: bsc.BitFlipSet
    lam: float
    trace: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class PairBundle:
    entries: list
    input_dim: int
    quantizer: QuantizerSpec
    tau: float = 1.0
    seed: int = 0
    regularizer: str = L2
    target_mu: float | None = None

    def __post_init__(self):
        lams = [e.lam for e in self.entries]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("bundle lambdas must be strictly ascending")
        for e in self.entries:
            n = e.encoder[-1][0].shape[1] * self.quantizer.B
            if len(e.mu) != n:
                raise ValueError(f"flip set of length {len(e.mu)} does not match N*B = {n}")

    @property
    def K(self) -> int:
        return len(self.entries)

    @property
    def lambdas(self) -> tuple:
        return tuple(e.lam for e in self.entries)

    @property
    def feature_dim(self) -> int:
        return self.entries[0].encoder[-1][0].shape[1]

    @property
    def n_bits(self) -> int:
        return self.feature_dim * self.quantizer.B

    def mu_sets(self) -> list:
        return [e.mu for e in self.entries]

    def model(self, k: int) -> SemanticAutoencoder:
        """Frozen autoencoder of the ``k``-th pair (1-based)."""
        e = self.entries[k - 1]
        return SemanticAutoencoder(
            e.encoder, e.decoder, bsc.raw_from_mu(e.mu.mu), self.quantizer, self.tau
        )


def _flatten(model: SemanticAutoencoder) -> list:
    flat = []
    for W, b in model.encoder + model.decoder:
        flat += [W, b]
    return flat + [model.raw_mu]


def _unflatten(model: SemanticAutoencoder, flat) -> dict:
    n_enc = len(model.encoder)
    n_dec = len(model.decoder)
    pairs = [(flat[2 * i], flat[2 * i + 1]) for i in range(n_enc + n_dec)]
    return {"encoder": pairs[:n_enc], "decoder": pairs[n_enc:], "raw_mu": flat[-1]}


def _flatten_grads(grads) -> list:
    flat = []
    for gW, gb in grads["encoder"] + grads["decoder"]:
        flat += [gW, gb]
    return flat + [grads["raw_mu"]]


def init_model(input_dim: int, config: TrainConfig, rng: np.random.Generator) -> SemanticAutoencoder:
    enc_widths = (input_dim, *config.encoder_hidden, config.feature_dim)
    dec_widths = (config.feature_dim, *config.decoder_hidden, input_dim)
    # start features mid-range so ReLU6 is active in both directions
    encoder = network.init_layers(enc_widths, rng, last_bias=0.5 * network.RELU6_CAP)
    decoder = network.init_layers(dec_widths, rng)
    decoder[0] = (decoder[0][0] / network.RELU6_CAP, decoder[0][1])
    mu0 = rng.uniform(*MU_INIT_RANGE, size=config.feature_dim * config.quantizer.B)
    return SemanticAutoencoder(encoder, decoder, bsc.raw_from_mu(mu0), config.quantizer, config.tau)


def _regularizer(config: TrainConfig, mu):
    if config.regularizer == L2:
        return network.l2_regularizer(mu)
    return network.target_regularizer(mu, config.target_mu)


def train_one(dataset, lam: float, config: TrainConfig, seed=None) -> BundleEntry:
    """Train one encoder/decoder/flip-probability triple with regularisation weight ``lam``."""
    data = np.atleast_2d(np.asarray(dataset, dtype=float))
    if data.shape[0] == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    model = init_model(data.shape[1], config, rng)
    flat = _flatten(model)
    state = AdamState.zeros_like(flat)
    rates = [config.lr_model] * (len(flat) - 1) + [config.lr_mu]
    n_steps = config.epochs * -(-data.shape[0] // config.batch_size)
    trace = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(data.shape[0])
        for start in range(0, data.shape[0], config.batch_size):
            if config.tau_final is not None:
                frac = step / max(n_steps - 1, 1)
                model.tau = config.tau + frac * (config.tau_final - config.tau)
            u = data[order[start:start + config.batch_size]]
            noise = np.clip(rng.random((u.shape[0], model.n_bits)), bsc.U_CLAMP, 1 - bsc.U_CLAMP)
            u_hat, cache = model.forward_train(u, noise)
            reg, d_mu = _regularizer(config, cache.mu)
            value = network.mse(u, u_hat) + lam * reg
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss {value} at epoch {epoch}, step {step}, lambda {lam}"
                )
            grads = model.backward(cache, network.mse_grad(u, u_hat), lam * d_mu)
            flat = adam_step(flat, _flatten_grads(grads), state, rates)
            model.set_parameters(_unflatten(model, flat))
            step += 1
        mu = model.mu
        if not (np.all(mu > 0) and np.all(mu < 0.5)):
            raise TrainingDivergedError(f"flip probability left (0, 0.5) at epoch {epoch}")
        if config.trace:
            trace.append(float(mu.mean()))
        log.debug("lambda=%g epoch=%d loss=%.5f mean_mu=%.4f", lam, epoch, value, mu.mean())
    return BundleEntry(
        [(W.copy(), b.copy()) for W, b in model.encoder],
        [(W.copy(), b.copy()) for W, b in model.decoder],
        bsc.BitFlipSet(model.mu),
        float(lam),
        np.array(trace),
    )


def train_ladder(dataset, config: TrainConfig) -> PairBundle:
    """One independent run per lambda, all from the same seed.

    Sharing the seed gives every run the same initial weights, flip
    probabilities, batch order and channel draws, so entries differ only
    through the regularisation weight.
    """
    data = np.atleast_2d(np.asarray(dataset, dtype=float))
    entries = [train_one(data, lam, config) for lam in config.lambdas]
    return PairBundle(
        entries,
        input_dim=data.shape[1],
        quantizer=config.quantizer,
        tau=config.tau if config.tau_final is None else config.tau_final,
        seed=config.seed,
        regularizer=config.regularizer,
        target_mu=config.target_mu,
    )


def mean_mu_trace(entry: BundleEntry) -> np.ndarray:
    """Per-epoch mean flip probability recorded during training."""
    if entry.trace.size == 0:
        raise ValueError("run was recorded without tracing")
    return entry.trace
