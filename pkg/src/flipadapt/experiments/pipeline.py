"""End-to-end simulation over Rayleigh blocks and SNR sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..allocator import AMPC, InfeasibleRateError, LinkBudget, apply_sort, restore_order, select_pair
from ..ber_model import InfeasibleTargetError
from ..phy import ChannelRealization, sample_block_fading, simulate_link
from ..trainer.ladder import PairBundle

PSNR_CAP = 120.0
SWEEP_FORMAT = "flipadapt-sweep v1"
SWEEP_COLUMNS = (
    "snr_max_db",
    "expected_gamma",
    "method",
    "trials",
    "mean_psnr",
    "psnr_std_error",
    "mean_p_sum",
    "max_p_sum",
    "mean_k_star",
    "rate",
    "scaled_fraction",
    "infeasible",
)


def psnr(u, u_hat, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)``, capped at 120 dB for (near-)perfect reconstructions."""
    if not peak > 0:
        raise ValueError("peak must be positive")
    u = np.asarray(u, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    if u.shape != u_hat.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {u_hat.shape}")
    err = float(np.mean((u - u_hat) ** 2))
    if err < peak * peak * 1e-12:
        return PSNR_CAP
    return min(10.0 * math.log10(peak * peak / err), PSNR_CAP)


def expected_gamma_for(snr_max_db: float, P_tot: float, n_bits: int) -> float:
    """Invert ``SNR_max = 10 log10(P_tot E[gamma] / NB)``."""
    return n_bits * 10.0 ** (snr_max_db / 10.0) / P_tot


def snr_max_db(P_tot: float, expected_gamma: float, n_bits: int) -> float:
    return 10.0 * math.log10(P_tot * expected_gamma / n_bits)


@dataclass
class BlockResult:
    feasible: bool
    gamma: float
    k_star: int = 0
    p_sum: float = math.nan
    psnr: float = math.nan
    scaled: bool = False
    rate: float = math.nan
    group_ber: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mu_bar: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reason: str = ""


@dataclass
class RunReport:
    blocks: list

    @property
    def trials(self) -> int:
        return len(self.blocks)

    @property
    def feasible(self) -> list:
        return [b for b in self.blocks if b.feasible]

    def _stat(self, name):
        values = np.array([getattr(b, name) for b in self.feasible], dtype=float)
        if values.size == 0:
            return math.nan, math.nan
        se = values.std(ddof=1) / math.sqrt(values.size) if values.size > 1 else 0.0
        return float(values.mean()), float(se)

    @property
    def mean_psnr(self) -> float:
        return self._stat("psnr")[0]

    @property
    def psnr_std_error(self) -> float:
        return self._stat("psnr")[1]

    @property
    def mean_p_sum(self) -> float:
        return self._stat("p_sum")[0]

    @property
    def mean_k_star(self) -> float:
        return self._stat("k_star")[0]

    @property
    def max_p_sum(self) -> float:
        values = [b.p_sum for b in self.feasible]
        return max(values) if values else math.nan

    @property
    def scaled_fraction(self) -> float:
        feas = self.feasible
        return sum(b.scaled for b in feas) / len(feas) if feas else math.nan

    @property
    def min_rate(self) -> float:
        values = [b.rate for b in self.feasible]
        return min(values) if values else math.nan


def run_simulate(
    bundle: PairBundle,
    budget: LinkBudget,
    dataset,
    n_blocks: int,
    seed=0,
    method: str = AMPC,
    images_per_block: int = 1,
    noiseless: bool = False,
) -> RunReport:
    """Simulate ``n_blocks`` independent fading blocks.

    ``budget.gamma`` is the expected channel-gain-to-noise ratio; each block
    draws its own Rayleigh realisation.  Per block the pair and plan are
    chosen, ``images_per_block`` images are sent through the selected
    encoder, the modem and the decoder, and the mean PSNR is kept.
    ``noiseless`` removes receiver noise while keeping the allocation,
    which isolates the encoder/decoder quality.

    Random streams are derived from ``seed`` and the block index only, so
    runs that differ in budget or method see the same fades, images and
    noise samples.
    """
    data = np.atleast_2d(np.asarray(dataset, dtype=float))
    streams = np.random.SeedSequence(seed).spawn(n_blocks)
    blocks = []
    for ss in streams:
        fade_ss, data_ss, noise_ss = ss.spawn(3)
        ch = sample_block_fading(budget.gamma, np.random.default_rng(fade_ss))
        picks = np.random.default_rng(data_ss).integers(0, data.shape[0], size=images_per_block)
        noise_rng = np.random.default_rng(noise_ss)
        try:
            plan = select_pair(bundle, replace(budget, gamma=ch.gamma), method)
        except (InfeasibleTargetError, InfeasibleRateError) as exc:
            blocks.append(BlockResult(False, ch.gamma, reason=str(exc)))
            continue
        model = bundle.model(plan.k_star)
        link = ChannelRealization(ch.h, 0.0) if noiseless else ch
        n = plan.n_bits
        errors = np.zeros(plan.T)
        scores = []
        for u in data[picks]:
            bits = model.encode_bits(u)[0]
            sent = apply_sort(bits, plan)
            detected = simulate_link(sent, plan.levels, plan.powers, link, noise_rng)[:n]
            flips = detected != sent
            for t, g in enumerate(plan.groups()):
                g = g[g < n]
                errors[t] += np.count_nonzero(flips[g])
            u_hat = model.decode_soft_bits(restore_order(detected, plan))[0]
            scores.append(psnr(u, u_hat))
        sizes = np.array([np.count_nonzero(g < n) for g in plan.groups()])
        blocks.append(
            BlockResult(
                True,
                ch.gamma,
                k_star=plan.k_star,
                p_sum=plan.P_sum,
                psnr=float(np.mean(scores)),
                scaled=plan.scaled,
                rate=plan.rate,
                group_ber=errors / (sizes * images_per_block),
                mu_bar=plan.mu_bar,
            )
        )
    return RunReport(blocks)


@dataclass
class SweepSpec:
    snr_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    P_tot: float = 100.0
    R_target: float = 4.0
    trials: int = 100
    seed: int = 0
    bundle_path: str | None = None
    method: str = AMPC
    images_per_block: int = 1

    def __post_init__(self):
        self.snr_grid = tuple(float(x) for x in self.snr_grid)
        if not self.snr_grid:
            raise ValueError("SNR grid must not be empty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


def run_sweep(spec: SweepSpec, bundle: PairBundle, dataset) -> list[dict]:
    """One row per SNR_max point; every point reuses the same per-trial random streams."""
    rows = []
    for snr in spec.snr_grid:
        eg = expected_gamma_for(snr, spec.P_tot, bundle.n_bits)
        budget = LinkBudget(spec.P_tot, spec.R_target, eg)
        report = run_simulate(
            bundle, budget, dataset, spec.trials, spec.seed, spec.method, spec.images_per_block
        )
        rows.append(
            {
                "snr_max_db": snr,
                "expected_gamma": eg,
                "method": spec.method,
                "trials": report.trials,
                "mean_psnr": report.mean_psnr,
                "psnr_std_error": report.psnr_std_error,
                "mean_p_sum": report.mean_p_sum,
                "max_p_sum": report.max_p_sum,
                "mean_k_star": report.mean_k_star,
                "rate": report.min_rate,
                "scaled_fraction": report.scaled_fraction,
                "infeasible": report.trials - len(report.feasible),
            }
        )
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {SWEEP_FORMAT}\n")
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != f"# {SWEEP_FORMAT}":
            raise ValueError(f"unrecognised sweep file header {header!r}")
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        row = {}
        for k, v in r.items():
            if k == "method":
                row[k] = v
            elif k in ("trials", "infeasible"):
                row[k] = int(v)
            else:
                row[k] = float(v)
        out.append(row)
    return out
