"""Monte-Carlo outage estimation by direct sampling of the cascade.

Samples are generated in fixed-size partitions, each with its own
generator seeded from ``(seed, partition index)``.  The sample stream is
therefore a function of ``(seed, samples)`` only; the worker count just
decides who draws which partition.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import PointingParams, TurbulenceParams, sdnr
from .closedform import ChainSpec, MONTE_CARLO

PARTITION_SIZE = 1 << 16


@dataclass(frozen=True)
class McConfig:
    samples: int = 1_000_000
    seed: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.workers < 1:
            raise ValueError("need at least one worker")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    stderr: float
    ci95: tuple[float, float]
    samples: int
    seed: int
    method: str = MONTE_CARLO

    @classmethod
    def from_count(cls, hits: int, samples: int, seed: int) -> "McEstimate":
        p = hits / samples
        se = math.sqrt(p * (1.0 - p) / samples)
        ci = (max(0.0, p - 1.96 * se), min(1.0, p + 1.96 * se))
        return cls(p, se, ci, samples, seed)


def partition_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_pointing(pp: PointingParams, u):
    """Inverse-CDF draw ``A_o * u**(1/xi)`` of the misalignment coefficient."""
    return pp.A_o * np.power(u, 1.0 / pp.xi)


def sample_gg(tp: TurbulenceParams, rng: np.random.Generator, size=None):
    """Gamma-gamma draw as ``omega * X * Y`` with unit-mean gamma factors."""
    if tp.deterministic:
        return np.full(size, tp.omega) if size is not None else tp.omega
    x = rng.standard_gamma(tp.alpha, size) / tp.alpha
    y = rng.standard_gamma(tp.beta, size) / tp.beta
    return tp.omega * x * y


def sample_fading(chain: ChainSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draws of ``Z = A / prod(g_i)``; same stream order as sample_channel_gain."""
    z = np.ones(size)
    for i, tp in enumerate(chain.turbulence):
        if i < chain.L:
            # 1 - U lies in (0, 1], the support the inverse CDF needs
            u = 1.0 - rng.random(size)
            z *= sample_pointing(chain.pointing[i], u)
        z *= sample_gg(tp, rng, size)
    return z


def sample_channel_gain(chain: ChainSpec, rng: np.random.Generator, size: int | None = None):
    """Draws of the end-to-end amplitude ``A``."""
    n = 1 if size is None else size
    a = sample_fading(chain, rng, n) * math.exp(chain.log_gain)
    return float(a[0]) if size is None else a


def sample_effective_gain(chain: ChainSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draws of the amplitude entering the SDNR under ``chain.convention``.

    Equal to sample_channel_gain for the first-principles convention.
    """
    return sample_fading(chain, rng, size) * math.exp(chain.log_effective_gain)


def _partitions(samples: int) -> list[tuple[int, int]]:
    out = []
    start = 0
    idx = 0
    while start < samples:
        n = min(PARTITION_SIZE, samples - start)
        out.append((idx, n))
        start += n
        idx += 1
    return out


def _count_partition(args) -> np.ndarray:
    chain, seed, index, n, thresholds = args
    a = sample_effective_gain(chain, partition_rng(seed, index), n)
    gamma = sdnr(a, chain.P_s, chain.N_o, chain.imp)
    return np.array([(gamma <= g).sum() for g in thresholds], dtype=np.int64)


def _count(chain: ChainSpec, thresholds: Sequence[float], mc: McConfig) -> np.ndarray:
    jobs = [(chain, mc.seed, idx, n, tuple(thresholds)) for idx, n in _partitions(mc.samples)]
    if mc.workers == 1 or len(jobs) == 1:
        counts = [_count_partition(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=mc.workers) as pool:
            counts = list(pool.map(_count_partition, jobs))
    # integer sums are independent of completion order
    return np.sum(counts, axis=0)


def estimate_op(chain: ChainSpec, mc: McConfig) -> McEstimate:
    """Fraction of samples whose SDNR does not exceed ``chain.gamma_th``."""
    return estimate_op_sweep(chain, [chain.gamma_th], mc)[0]


def estimate_op_sweep(chain: ChainSpec, thresholds: Sequence[float], mc: McConfig) -> list[McEstimate]:
    """Outage estimates for several thresholds from one shared sample set.

    Points along the sweep are correlated since they reuse the same draws.
    """
    k2 = chain.imp.kappa2
    thresholds = [float(g) for g in thresholds]
    todo = [g for g in thresholds if not g * k2 > 1.0]
    counts = dict(zip(todo, _count(chain, todo, mc))) if todo else {}
    out = []
    for g in thresholds:
        if g * k2 > 1.0:
            out.append(McEstimate.from_count(mc.samples, mc.samples, mc.seed))
        else:
            out.append(McEstimate.from_count(int(counts[g]), mc.samples, mc.seed))
    return out
