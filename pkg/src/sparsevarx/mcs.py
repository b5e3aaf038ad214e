"""Model confidence sets: equal-predictive-ability testing with a circular
block bootstrap and iterative elimination of the worst performer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LossMatrix", "McsResult", "loss_differentials", "mcs"]

_VAR_FLOOR = 1e-12


@dataclass
class LossMatrix:
    """Per-model, per-period squared forecast errors over shared origins."""

    losses: np.ndarray
    model_names: list[str]

    def __post_init__(self) -> None:
        self.losses = np.atleast_2d(np.asarray(self.losses, dtype=float))
        if self.losses.shape[0] != len(self.model_names):
            raise ValueError("one row of losses per model name required")
        if np.any(self.losses < 0) or not np.all(np.isfinite(self.losses)):
            raise ValueError("losses must be finite and non-negative")

    @property
    def n_models(self) -> int:
        return self.losses.shape[0]

    @property
    def n_periods(self) -> int:
        return self.losses.shape[1]


def loss_differentials(losses: LossMatrix) -> np.ndarray:
    """Antisymmetric tensor d[i, j, t] of pairwise per-period loss differences."""
    if losses.n_models < 2:
        raise ValueError("need at least two models")
    L = losses.losses
    return L[:, None, :] - L[None, :, :]


@dataclass
class McsResult:
    survivors: list[str]
    eliminated: list[str]
    pvalues: list[float]
    alpha: float

    def __contains__(self, name: str) -> bool:
        return name in self.survivors


def _circular_block_indices(rng: np.random.Generator, n_periods: int, block_len: int,
                            n_boot: int) -> np.ndarray:
    n_blocks = int(np.ceil(n_periods / block_len))
    starts = rng.integers(0, n_periods, size=(n_boot, n_blocks))
    offsets = np.arange(block_len)
    idx = (starts[:, :, None] + offsets[None, None, :]) % n_periods
    return idx.reshape(n_boot, -1)[:, :n_periods]


def mcs(losses: LossMatrix, alpha: float = 0.15, n_boot: int = 5000,
        block_len: int | None = None, seed: int = 0) -> McsResult:
    """Surviving set of the iterated equal-predictive-ability test.

    The range statistic max |dbar_ij| / se_ij is compared against its
    bootstrap null; while the test rejects at level ``alpha``, the model with
    the largest average loss differential is removed.  Bootstrap time draws are
    made once, so the outcome is deterministic in the seed and invariant to
    model ordering.
    """
    n, P = losses.n_models, losses.n_periods
    if n < 2:
        return McsResult(list(losses.model_names), [], [], alpha)
    if block_len is None:
        block_len = max(int(np.floor(P ** (1.0 / 3.0))), 1)
    if P < 2 * block_len:
        raise ValueError("need n_periods >= 2 * block_len")
    rng = np.random.default_rng(seed)
    idx = _circular_block_indices(rng, P, block_len, n_boot)
    L = losses.losses
    sample_means = L.mean(axis=1)
    boot_means = L[:, idx].mean(axis=2)  # (n_models, n_boot)

    active = list(range(n))
    eliminated: list[str] = []
    pvalues: list[float] = []
    while len(active) > 1:
        sub = np.asarray(active)
        means = sample_means[sub]
        dbar = means[:, None] - means[None, :]
        dstar = boot_means[sub][:, None, :] - boot_means[sub][None, :, :]
        se = np.sqrt(np.maximum(dstar.var(axis=2), _VAR_FLOOR))
        stat = float(np.max(np.abs(dbar) / se))
        null = np.max(np.abs(dstar - dbar[:, :, None]) / se[:, :, None], axis=(0, 1))
        pval = float(np.mean(null >= stat))
        pvalues.append(pval)
        if pval >= alpha:
            break
        worst_pos = int(np.argmax(dbar.mean(axis=1)))
        eliminated.append(losses.model_names[active[worst_pos]])
        active.pop(worst_pos)
    survivors = [losses.model_names[i] for i in active]
    return McsResult(survivors=survivors, eliminated=eliminated, pvalues=pvalues, alpha=alpha)
