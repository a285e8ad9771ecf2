"""Throughput benchmark: steps/second over parallel-env counts.

Each timed loop iteration feeds the current observation through a fixed
single-convolution policy stub (conv 16x8x8 stride 4, ReLU, linear
projection, tanh) and steps the batched env with the resulting actions, so
the measurement includes action selection the way a training loop would.
Timings use a monotonic clock; a hash of the final observation doubles as
a reproducibility check across runs.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .env import EnvConfig, make_env, step
from .prng import fold_in, key_from_seed, uniform
from .threading_utils import parallel_over_ranges

__all__ = [
    "ConvStub",
    "conv_stub_forward",
    "BenchConfig",
    "BenchRecord",
    "run_benchmark",
    "write_csv",
    "read_csv",
]

KERNEL_SIZE = 8
STRIDE = 4
N_FILTERS = 16


@dataclass(frozen=True)
class ConvStub:
    """Fixed policy surrogate; weights are a pure function of the seed.

    Because the kernel is exactly twice the stride, every 8x8 patch is a
    2x2 arrangement of non-overlapping 4x4 tiles, so the forward pass
    extracts each tile once and applies the four quadrant weight blocks
    as a single matrix product (``conv_blocks``).
    """

    conv: np.ndarray  # (K*K*C, filters) float32, row index (ky, kx, ch)
    conv_blocks: np.ndarray  # (STRIDE*STRIDE*C, 4*filters) quadrant layout
    proj: np.ndarray  # (out_h*out_w*filters, n_joints) float32
    height: int
    width: int
    channels: int
    n_joints: int

    @classmethod
    def create(cls, height: int, width: int, channels: int, n_joints: int, seed: int = 0):
        out_h = (height - KERNEL_SIZE) // STRIDE + 1
        out_w = (width - KERNEL_SIZE) // STRIDE + 1
        if out_h < 1 or out_w < 1:
            raise ValueError("observation smaller than the conv kernel")
        key = key_from_seed(seed)
        fan_in = KERNEL_SIZE * KERNEL_SIZE * channels
        scale = np.sqrt(6.0 / fan_in)
        conv = uniform(fold_in(key, 0), fan_in * N_FILTERS, -scale, scale)
        conv = conv.astype(np.float32).reshape(fan_in, N_FILTERS)
        feat = out_h * out_w * N_FILTERS
        pscale = np.sqrt(6.0 / feat)
        proj = uniform(fold_in(key, 1), feat * n_joints, -pscale, pscale)
        # Quadrant (dy, dx) of the kernel -> columns [16q, 16q + 16).
        blocks = np.empty((STRIDE * STRIDE * channels, 4 * N_FILTERS), np.float32)
        k4 = conv.reshape(2, STRIDE, 2, STRIDE, channels, N_FILTERS)
        for dy in range(2):
            for dx in range(2):
                q = 2 * dy + dx
                tile = k4[dy, :, dx].reshape(STRIDE * STRIDE * channels, N_FILTERS)
                blocks[:, q * N_FILTERS : (q + 1) * N_FILTERS] = tile
        return cls(
            conv=conv,
            conv_blocks=blocks,
            proj=proj.astype(np.float32).reshape(feat, n_joints),
            height=height,
            width=width,
            channels=channels,
            n_joints=n_joints,
        )


@njit(cache=True, nogil=True)
def _conv_forward_range(obs, wblocks, wproj, out):
    batch, h, w, c = obs.shape
    out_h = (h - KERNEL_SIZE) // STRIDE + 1
    out_w = (w - KERNEL_SIZE) // STRIDE + 1
    bh = out_h + 1
    bw = out_w + 1
    tile_len = STRIDE * STRIDE * c
    tiles = np.empty((bh * bw, tile_len), dtype=np.float32)
    feat = np.empty((1, out_h * out_w * N_FILTERS), dtype=np.float32)
    inv = np.float32(1.0 / 255.0)
    for b in range(batch):
        for by in range(bh):
            for bx in range(bw):
                row = by * bw + bx
                p = 0
                for yy in range(STRIDE):
                    y = by * STRIDE + yy
                    x0 = bx * STRIDE * c
                    src = obs[b, y].reshape(w * c)
                    for i in range(STRIDE * c):
                        tiles[row, p] = src[x0 + i] * inv
                        p += 1
        acts = np.dot(tiles, wblocks)  # (bh*bw, 4*filters)
        for oy in range(out_h):
            for ox in range(out_w):
                i00 = oy * bw + ox
                base = (oy * out_w + ox) * N_FILTERS
                for f in range(N_FILTERS):
                    v = (
                        acts[i00, f]
                        + acts[i00 + 1, N_FILTERS + f]
                        + acts[i00 + bw, 2 * N_FILTERS + f]
                        + acts[i00 + bw + 1, 3 * N_FILTERS + f]
                    )
                    feat[0, base + f] = v if v > 0.0 else 0.0
        logits = np.dot(feat, wproj)
        for j in range(logits.shape[1]):
            out[b, j] = np.tanh(logits[0, j])


def conv_stub_forward(stub: ConvStub, obs: np.ndarray, threads: int = 1) -> np.ndarray:
    """Actions in [-1, 1]; batch row i depends only on obs row i."""
    obs = np.asarray(obs)
    if obs.ndim != 4 or obs.shape[1:] != (stub.height, stub.width, stub.channels):
        raise ValueError(
            f"obs must be (batch, {stub.height}, {stub.width}, {stub.channels}), "
            f"got {obs.shape}"
        )
    out = np.empty((obs.shape[0], stub.n_joints), dtype=np.float64)
    parallel_over_ranges(
        obs.shape[0], threads,
        lambda lo, hi: _conv_forward_range(obs[lo:hi], stub.conv_blocks, stub.proj, out[lo:hi]),
    )
    return out


# --------------------------------------------------------------------------
# benchmark protocol


@dataclass(frozen=True)
class BenchRecord:
    env_name: str
    batch: int
    distractor_mode: str
    steps_measured: int
    wall_seconds: float
    steps_per_second: float
    resolution: str
    digest: str = ""  # reproducibility hash; not part of the CSV schema


@dataclass(frozen=True)
class BenchConfig:
    env_names: tuple[str, ...] = ("cheetah_lite", "walker_lite", "hopper_lite")
    batches: tuple[int, ...] = (1, 10, 100, 1000)
    distractor_modes: tuple[str, ...] = ("none",)
    video_pack_path: str | None = None
    warmup_steps: int = 50
    measure_steps: int = 500
    width: int = 84
    height: int = 84
    seed: int = 0
    threads: int = 1

    def validate(self) -> None:
        if self.measure_steps < 100:
            raise ValueError("measure_steps must be >= 100")
        if "video" in self.distractor_modes and not self.video_pack_path:
            raise ValueError("video mode needs video_pack_path")


def _bench_one(config: BenchConfig, env_name: str, batch: int, mode: str) -> BenchRecord:
    env_cfg = EnvConfig(
        model=env_name,
        batch=batch,
        width=config.width,
        height=config.height,
        distractor_mode=mode,
        video_pack_path=config.video_pack_path if mode == "video" else None,
        seed=config.seed,
        threads=config.threads,
    )
    env, state, obs = make_env(env_cfg)
    stub = ConvStub.create(config.height, config.width, 3, env.n_joints, seed=config.seed)
    for _ in range(config.warmup_steps):
        actions = conv_stub_forward(stub, obs, threads=config.threads)
        state, out = step(env, state, actions)
        obs = out.obs
    t0 = time.perf_counter()
    for _ in range(config.measure_steps):
        actions = conv_stub_forward(stub, obs, threads=config.threads)
        state, out = step(env, state, actions)
        obs = out.obs
    wall = time.perf_counter() - t0
    steps = batch * config.measure_steps
    return BenchRecord(
        env_name=env_name,
        batch=batch,
        distractor_mode=mode,
        steps_measured=steps,
        wall_seconds=wall,
        steps_per_second=steps / wall,
        resolution=f"{config.width}x{config.height}",
        digest=hashlib.sha256(obs.tobytes()).hexdigest(),
    )


def run_benchmark(config: BenchConfig, progress=None) -> list[BenchRecord]:
    """One record per (env, batch, mode); warmup excluded from timing."""
    config.validate()
    records = []
    for env_name in config.env_names:
        for mode in config.distractor_modes:
            for batch in config.batches:
                rec = _bench_one(config, env_name, batch, mode)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    return records


# --------------------------------------------------------------------------
# CSV output

_CSV_HEADER = "env,batch,distractor,steps,seconds,sps,resolution"


def write_csv(records: list[BenchRecord], path) -> None:
    """Deterministic formatting: floats at 6 significant digits."""
    try:
        with open(path, "w") as f:
            f.write(_CSV_HEADER + "\n")
            for r in records:
                f.write(
                    f"{r.env_name},{r.batch},{r.distractor_mode},{r.steps_measured},"
                    f"{r.wall_seconds:.6g},{r.steps_per_second:.6g},{r.resolution}\n"
                )
    except OSError as e:
        raise OSError(f"cannot write benchmark CSV to {path}: {e}") from e


def read_csv(path) -> list[BenchRecord]:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError(f"{path}: missing benchmark CSV header")
    records = []
    for ln in lines[1:]:
        env_name, batch, mode, steps, seconds, sps, res = ln.split(",")
        records.append(
            BenchRecord(
                env_name=env_name,
                batch=int(batch),
                distractor_mode=mode,
                steps_measured=int(steps),
                wall_seconds=float(seconds),
                steps_per_second=float(sps),
                resolution=res,
            )
        )
    return records
