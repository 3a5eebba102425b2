"""Reproducible discretized one-dimensional Brownian motion.

Increments are drawn from a counter-based Philox stream keyed by
(seed, path_index), so path p is bit-identical no matter how an ensemble is
batched or parallelized.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BrownianPath:
    """One discretized path: increments dW_n ~ N(0, dt), n = 0..n_steps-1."""

    T: float
    n_steps: int
    increments: np.ndarray
    seed: int
    path_index: int

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def values(self) -> np.ndarray:
        """w(t_n) on the n_steps+1 grid, w(0) = 0."""
        w = np.empty(self.n_steps + 1)
        w[0] = 0.0
        np.cumsum(self.increments, out=w[1:])
        return w


def _increments(seed: int, path_index: int, n_steps: int, dt: float) -> np.ndarray:
    bg = np.random.Philox(key=np.array([seed, path_index], dtype=np.uint64))
    rng = np.random.Generator(bg)
    return rng.standard_normal(n_steps) * np.sqrt(dt)


def sample_path(seed: int, path_index: int, n_steps: int, T: float) -> BrownianPath:
    if n_steps < 1 or T <= 0.0:
        raise ValueError("need n_steps >= 1 and T > 0")
    return BrownianPath(T=T, n_steps=n_steps,
                        increments=_increments(seed, path_index, n_steps, T / n_steps),
                        seed=seed, path_index=path_index)


def sample_paths(seed: int, n_paths: int, n_steps: int, T: float,
                 first_index: int = 0) -> list[BrownianPath]:
    """Independent paths, deterministic in (seed, path index)."""
    if n_paths < 1:
        raise ValueError("need n_paths >= 1")
    return [sample_path(seed, first_index + p, n_steps, T) for p in range(n_paths)]


def increments_matrix(seed: int, n_paths: int, n_steps: int, T: float,
                      first_index: int = 0) -> np.ndarray:
    """(n_paths, n_steps) increment array; row p equals path p's increments."""
    dt = T / n_steps
    out = np.empty((n_paths, n_steps))
    for p in range(n_paths):
        out[p] = _increments(seed, first_index + p, n_steps, dt)
    return out


def dump_path(path: BrownianPath, fname: str) -> None:
    """Binary dump: little-endian header (T f8, n_steps i8, seed i8) + increments f8."""
    with open(fname, "wb") as fh:
        fh.write(struct.pack("<dqq", path.T, path.n_steps, path.seed))
        fh.write(path.increments.astype("<f8").tobytes())


def load_path(fname: str, path_index: int = 0) -> BrownianPath:
    with open(fname, "rb") as fh:
        T, n_steps, seed = struct.unpack("<dqq", fh.read(24))
        inc = np.frombuffer(fh.read(8 * n_steps), dtype="<f8").copy()
    return BrownianPath(T=T, n_steps=n_steps, increments=inc,
                        seed=seed, path_index=path_index)
