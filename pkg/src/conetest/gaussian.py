"""Reproducible standard Gaussian draws and Monte Carlo estimates.

Replicate i of a computation seeded with ``seed`` draws from its own Philox
stream: the seed is the Philox key and i sits in the upper half of the
256-bit counter. A replicate's vector therefore depends only on (seed, i),
never on which worker evaluated it or in which order. Normals are produced
by numpy's ziggurat sampler on top of that stream.

Work is split into blocks of consecutive replicates. Blocks may run on a
thread pool, and results are always reassembled in replicate order so the
output is identical for every worker count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass

import numpy as np

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64
BLOCK_REPLICATES = 256
MAX_BLOCK_ENTRIES = 1 << 22  # floats held per block (32 MiB)


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream ``stream_id`` of the computation keyed by ``seed``."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < MAX_SEED:
            raise ValueError(f"seed must lie in [0, 2**64), got {self.seed}")
        if not 0 <= int(self.stream_id) < 2 ** 128:
            raise ValueError(f"stream_id must lie in [0, 2**128), got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=int(self.seed), counter=int(self.stream_id) << 128))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    seed: int

    @classmethod
    def from_values(cls, values, seed: int) -> "McEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        if n < 2:
            raise ValueError("a Monte Carlo estimate needs at least two replicates")
        return cls(float(values.mean()), float(values.std(ddof=1) / math.sqrt(n)), int(n), int(seed))

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(seed: int, *labels: int) -> int:
    """Independent child seed for a labelled sub-computation."""
    state = np.random.SeedSequence([int(seed), *(int(v) for v in labels)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def sample_std_gaussian(d: int, stream: RngStream) -> np.ndarray:
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    return stream.generator().standard_normal(d)


def gaussian_rows(d: int, seed: int, start: int, stop: int) -> np.ndarray:
    """Rows start..stop-1 of the replicate matrix for ``seed``."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    out = np.empty((max(stop - start, 0), d))
    for row, i in enumerate(range(start, stop)):
        out[row] = RngStream(seed, i).generator().standard_normal(d)
    return out


def block_size(d: int) -> int:
    return max(1, min(BLOCK_REPLICATES, MAX_BLOCK_ENTRIES // d))


def _blocks(n: int, d: int):
    size = block_size(d)
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def _run_blocks(fn, d: int, n: int, seed: int, workers: int = 1) -> list:
    """Evaluate fn(rows) on every block of replicates, results in block order."""
    if n < 1:
        raise ValueError(f"replicate count must be positive, got {n}")
    blocks = _blocks(n, d)

    def evaluate(bounds):
        start, stop = bounds
        return fn(gaussian_rows(d, seed, start, stop))

    if workers <= 1 or len(blocks) == 1:
        return [evaluate(b) for b in blocks]

    results = [None] * len(blocks)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(evaluate, b): idx for idx, b in enumerate(blocks)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results


def mc_map(fn_rows, d: int, n: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-replicate values of fn_rows, which maps an (b, d) block to b outputs."""
    return np.concatenate([np.asarray(r, dtype=float) for r in _run_blocks(fn_rows, d, n, seed, workers)])


def mc_estimate(f, d: int, n: int, seed: int, workers: int = 1) -> McEstimate:
    """Sample mean and standard error of f(g) over n replicates of g ~ N(0, I_d)."""
    values = mc_map(lambda rows: [f(g) for g in rows], d, n, seed, workers)
    return McEstimate.from_values(values, seed)


def mc_vector_mean(fn_rows, d: int, n: int, seed: int, workers: int = 1):
    """Coordinatewise mean and standard error of a vector-valued statistic.

    Accumulates block sums so the (n, k) value matrix is never held at once.
    """
    if n < 2:
        raise ValueError("a Monte Carlo estimate needs at least two replicates")

    def moments(rows):
        values = np.asarray(fn_rows(rows), dtype=float)
        return values.sum(axis=0), np.square(values).sum(axis=0)

    total = total_sq = 0.0
    for block_sum, block_sq in _run_blocks(moments, d, n, seed, workers):
        total = total + block_sum
        total_sq = total_sq + block_sq
    mean = total / n
    variance = np.maximum(total_sq - n * np.square(mean), 0.0) / (n - 1)
    return mean, np.sqrt(variance / n)
