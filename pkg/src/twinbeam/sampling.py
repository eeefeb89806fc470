"""Monte Carlo generation of per-pulse count pairs from the physical model.

Each pulse draws, for every one of the mu modes, a photon number from the
geometric per-mode law (mean N/mu, both arms carry the same number) and
thins the two arms with independent binomial detection at efficiency eta;
the pulse's record is the per-arm sums.  This is the model definition run
forward, so large sampled histograms constitute an end-to-end stochastic
oracle for every closed formula in the package.

Reproducibility contract: a run is a pure function of (params, n_shots,
seed), independent of how many workers execute it.  Shots are partitioned
into fixed-size blocks and each block consumes its own counter-partitioned
Philox stream, so any scheduling of blocks produces bitwise-identical
records.  Geometric variates use an inverse-transform from the uniform
stream (exact and branch-free); binomial thinning draws from the same
block stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import JointDistribution
from .errors import ParameterError
from .params import ExperimentParams

__all__ = ["ShotRecord", "sample_shot", "sample_run", "histogram", "BLOCK_SIZE"]

# Shots per counter block.  Fixed: changing it changes the streams.
BLOCK_SIZE = 8192

# Each block owns 2**128 Philox states; draw counts per block can never
# approach that, so blocks are collision-free by construction.
_BLOCK_STRIDE = 1 << 128


@dataclass(frozen=True)
class ShotRecord:
    """Sequence of per-pulse count pairs (s, t) plus provenance metadata."""

    shots: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        shots = np.ascontiguousarray(self.shots)
        if shots.ndim != 2 or shots.shape[1] != 2 or shots.shape[0] < 1:
            raise ParameterError("shots must be a non-empty (n, 2) array")
        if not np.issubdtype(shots.dtype, np.integer):
            if not np.all(shots == np.floor(shots)):
                raise ParameterError("shot counts must be integers")
            shots = shots.astype(np.int64)
        if np.any(shots < 0):
            raise ParameterError("shot counts must be >= 0")
        shots = shots.astype(np.int64, copy=False)
        shots.flags.writeable = False
        object.__setattr__(self, "shots", shots)

    def __len__(self) -> int:
        return int(self.shots.shape[0])

    @property
    def s(self) -> np.ndarray:
        return self.shots[:, 0]

    @property
    def t(self) -> np.ndarray:
        return self.shots[:, 1]


def _mode_count(params: ExperimentParams) -> int:
    if not float(params.mu).is_integer():
        raise ParameterError(
            f"sampling requires an integer number of physical modes, got mu={params.mu}"
        )
    return int(params.mu)


def _validate_sampling(params: ExperimentParams) -> int:
    if not 0.0 < params.eta <= 1.0:
        raise ParameterError(f"eta must be in (0, 1] for sampling, got {params.eta}")
    return _mode_count(params)


def _draw_block(params: ExperimentParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """n shots from one stream; fixed draw order (photons, arm 1, arm 2)."""
    mu = int(params.mu)
    lam_sq = params.lambda_sq
    out = np.empty((n, 2), dtype=np.int64)
    if lam_sq == 0.0:
        out[:] = 0
        return out
    # Inverse-transform geometric on {0,1,...}: 1-u is uniform on (0,1].
    u = rng.random((n, mu))
    photons = np.floor(np.log1p(-u) / math.log(lam_sq)).astype(np.int64)
    flat = photons.ravel()
    if params.eta == 1.0:
        out[:, 0] = photons.sum(axis=1)
        out[:, 1] = out[:, 0]
        return out
    out[:, 0] = rng.binomial(flat, params.eta).reshape(n, mu).sum(axis=1)
    out[:, 1] = rng.binomial(flat, params.eta).reshape(n, mu).sum(axis=1)
    return out


def sample_shot(params: ExperimentParams, rng: np.random.Generator) -> tuple[int, int]:
    """One pulse: per-mode geometric photon pairs, independently thinned arms."""
    _validate_sampling(params)
    pair = _draw_block(params, 1, rng)[0]
    return int(pair[0]), int(pair[1])


def _block_rng(seed: int, block_index: int) -> np.random.Generator:
    bit_gen = np.random.Philox(key=seed, counter=block_index * _BLOCK_STRIDE)
    return np.random.Generator(bit_gen)


def sample_run(
    params: ExperimentParams,
    n_shots: int,
    seed: int,
    workers: int = 1,
) -> ShotRecord:
    """Deterministic record of n_shots pulses for (params, seed).

    The result is bitwise-independent of ``workers``: parallelism only
    distributes the fixed counter blocks.
    """
    _validate_sampling(params)
    if isinstance(n_shots, bool) or not isinstance(n_shots, (int, np.integer)) or n_shots < 1:
        raise ParameterError(f"n_shots must be a positive integer, got {n_shots!r}")
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
    if not isinstance(workers, (int, np.integer)) or workers < 1:
        raise ParameterError(f"workers must be a positive integer, got {workers!r}")

    n_shots = int(n_shots)
    blocks = [
        (index, min(BLOCK_SIZE, n_shots - start))
        for index, start in enumerate(range(0, n_shots, BLOCK_SIZE))
    ]

    def run_block(spec: tuple[int, int]) -> np.ndarray:
        index, size = spec
        return _draw_block(params, size, _block_rng(int(seed), index))

    if workers == 1 or len(blocks) == 1:
        parts = [run_block(spec) for spec in blocks]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(run_block, blocks))
    shots = np.vstack(parts)
    meta = {
        "params": {"mu": params.mu, "eta": params.eta, "mean_counts": params.mean_counts},
        "seed": int(seed),
        "n_shots": n_shots,
    }
    return ShotRecord(shots=shots, meta=meta)


def histogram(record: ShotRecord) -> JointDistribution:
    """Normalised empirical joint table of a record; raw counts and the shot
    total are preserved in the table metadata."""
    s = record.s
    t = record.t
    counts = np.zeros((int(s.max()) + 1, int(t.max()) + 1))
    np.add.at(counts, (s, t), 1.0)
    n = len(record)
    params = None
    raw = record.meta.get("params")
    if isinstance(raw, dict) and set(raw) >= {"mu", "eta", "mean_counts"}:
        params = ExperimentParams(
            raw["mu"], raw["eta"], raw["mean_counts"],
            allow_unit_eta=raw["eta"] == 1.0,
        )
    return JointDistribution(
        probs=counts / n,
        tail_bound=0.0,
        params=params,
        tol=0.0,
        symmetric=False,
        meta={"n_shots": n, "counts": counts.astype(np.int64)},
    )
