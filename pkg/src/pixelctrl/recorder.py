"""Rollout recording: PNG frame dumps and trajectory digests.

A trajectory digest is a SHA-256 hash chain over observations: with
``h[-1]`` defined as 32 zero bytes, ``h[t] = sha256(h[t-1] || obs_t)``
where ``obs_t`` is the raw observation buffer after t env steps (t = 0 is
the observation returned by ``make_env``). Entry t therefore certifies
every observation up to t, and comparing two digest files pinpoints the
first step at which two runs diverged.

The PNG writer is self-contained (zlib + hand-built chunks, filter 0,
no interlace) so identical frames always produce identical files.
"""

from __future__ import annotations

import hashlib
import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .bench import ConvStub, conv_stub_forward
from .env import Env, EnvConfig, make_env, step
from .prng import Key, fold_in, fold_in_many, key_from_seed, words_per_key

__all__ = [
    "write_png",
    "read_png",
    "TrajectoryDigest",
    "save_digest",
    "load_digest",
    "make_policy",
    "record_rollout",
    "VerifyResult",
    "verify_digest",
]

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def write_png(image: np.ndarray, path) -> None:
    """Write an (H, W, 3) RGB or (H, W)/(H, W, 1) grayscale uint8 PNG."""
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.dtype != np.uint8 or image.ndim not in (2, 3):
        raise ValueError(f"expected uint8 (H, W[, 3]) image, got {image.dtype} {image.shape}")
    if image.ndim == 3 and image.shape[2] != 3:
        raise ValueError(f"expected 3 color channels, got {image.shape[2]}")
    h, w = image.shape[:2]
    color_type = 2 if image.ndim == 3 else 0
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    rows = np.ascontiguousarray(image).reshape(h, -1)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(h))
    data = zlib.compress(raw, 6)
    with open(path, "wb") as f:
        f.write(_PNG_SIG)
        f.write(_chunk(b"IHDR", ihdr))
        f.write(_chunk(b"IDAT", data))
        f.write(_chunk(b"IEND", b""))


def read_png(path) -> np.ndarray:
    """Decode PNGs produced by ``write_png`` (8-bit, filter 0, no interlace)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != _PNG_SIG:
        raise ValueError(f"{path}: not a PNG file")
    pos = 8
    ihdr = None
    idat = b""
    while pos < len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise ValueError(f"{path}: missing IHDR")
    w, h, depth, color_type, _, _, interlace = ihdr
    if depth != 8 or interlace != 0 or color_type not in (0, 2):
        raise ValueError(f"{path}: unsupported PNG variant")
    channels = 3 if color_type == 2 else 1
    raw = zlib.decompress(idat)
    stride = 1 + w * channels
    if len(raw) != h * stride:
        raise ValueError(f"{path}: bad pixel payload size")
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(h, stride)
    if np.any(rows[:, 0] != 0):
        raise ValueError(f"{path}: only filter type 0 is supported")
    image = rows[:, 1:].reshape(h, w, channels).copy()
    return image[..., 0] if channels == 1 else image


# --------------------------------------------------------------------------
# observation hash chain


_CHAIN_SEED = b"\x00" * 32


def chain_update(prev: bytes, obs: np.ndarray) -> bytes:
    return hashlib.sha256(prev + np.ascontiguousarray(obs).tobytes()).digest()


@dataclass(frozen=True)
class TrajectoryDigest:
    policy: str
    steps: int
    hashes: tuple[str, ...]  # hex, one per t in [0, steps]

    @property
    def final(self) -> str:
        return self.hashes[-1]


def save_digest(digest: TrajectoryDigest, path) -> None:
    with open(path, "w") as f:
        f.write("PXTJ v1\n")
        f.write(f"policy = {digest.policy}\n")
        f.write(f"steps = {digest.steps}\n")
        for t, h in enumerate(digest.hashes):
            f.write(f"{t} {h}\n")


def load_digest(path) -> TrajectoryDigest:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines or lines[0] != "PXTJ v1":
        raise ValueError(f"{path}: not a trajectory digest file")
    meta: dict[str, str] = {}
    hashes: list[str] = []
    for ln in lines[1:]:
        if "=" in ln:
            key, _, value = ln.partition("=")
            meta[key.strip()] = value.strip()
        else:
            t, h = ln.split()
            if int(t) != len(hashes):
                raise ValueError(f"{path}: hash entries out of order at t={t}")
            hashes.append(h)
    steps = int(meta["steps"])
    if len(hashes) != steps + 1:
        raise ValueError(f"{path}: expected {steps + 1} hashes, found {len(hashes)}")
    return TrajectoryDigest(policy=meta["policy"], steps=steps, hashes=tuple(hashes))


# --------------------------------------------------------------------------
# policies


def _random_actions(policy_key: Key, t: int, env: Env) -> np.ndarray:
    """Uniform [-1, 1) actions; env i's row depends only on its global index.

    Row i equals uniform(fold_in(fold_in(policy_key, t), g_i), n_joints,
    -1, 1) for global index g_i, so a sliced batch reproduces the full
    layout's actions exactly.
    """
    cfg = env.config
    nj = env.n_joints
    key_t = fold_in(policy_key, t)
    global_ids = cfg.env_offset + np.arange(cfg.batch, dtype=np.uint64)
    hi, lo = fold_in_many(key_t, global_ids)
    out = np.empty((cfg.batch, nj), dtype=np.float64)
    for blk in range((nj + 1) // 2):
        w0, w1 = words_per_key(hi, lo, blk)
        for col, w in ((2 * blk, w0), (2 * blk + 1, w1)):
            if col < nj:
                u = (w >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
                out[:, col] = np.minimum(-1.0 + 2.0 * u, np.nextafter(1.0, -np.inf))
    return out


def make_policy(spec: str, env: Env):
    """Parse a policy descriptor into an (obs, t) -> actions callable.

    Descriptors: ``zeros``, ``random:<seed>``, ``conv:<seed>``.
    """
    if spec == "zeros":
        zero = np.zeros((env.config.batch, env.n_joints))
        return lambda obs, t: zero
    kind, _, arg = spec.partition(":")
    if kind == "random":
        policy_key = key_from_seed(int(arg or "0"))
        return lambda obs, t: _random_actions(policy_key, t, env)
    if kind == "conv":
        h, w, c = env.obs_shape
        stub = ConvStub.create(h, w, c, env.n_joints, seed=int(arg or "0"))
        threads = env.config.threads
        return lambda obs, t: conv_stub_forward(stub, obs, threads=threads)
    raise ValueError(f"unknown policy {spec!r} (want zeros, random:<seed>, conv:<seed>)")


# --------------------------------------------------------------------------
# rollout recording and verification


def record_rollout(
    config: EnvConfig,
    policy: str,
    steps: int,
    dump_every: int = 0,
    dump_dir=None,
) -> TrajectoryDigest:
    """Run the env for ``steps`` steps and hash every observation.

    With ``dump_every`` > 0, env 0's observation at each multiple of
    ``dump_every`` (including t = 0) is written to ``dump_dir`` as
    ``frame_<t>.png``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if dump_every > 0:
        if dump_dir is None:
            raise ValueError("dump_every needs dump_dir")
        os.makedirs(dump_dir, exist_ok=True)
    env, state, obs = make_env(config)
    act = make_policy(policy, env)

    def dump(t, obs):
        if dump_every > 0 and t % dump_every == 0:
            write_png(obs[0], os.path.join(dump_dir, f"frame_{t:06d}.png"))

    h = chain_update(_CHAIN_SEED, obs)
    hashes = [h.hex()]
    dump(0, obs)
    for t in range(1, steps + 1):
        state, out = step(env, state, act(obs, t - 1))
        obs = out.obs
        h = chain_update(h, obs)
        hashes.append(h.hex())
        dump(t, obs)
    return TrajectoryDigest(policy=policy, steps=steps, hashes=tuple(hashes))


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    first_divergence: int | None  # smallest t whose hash differs, else None
    recomputed: TrajectoryDigest


def verify_digest(digest: TrajectoryDigest, config: EnvConfig) -> VerifyResult:
    """Re-run the recorded rollout and compare hash chains step by step."""
    fresh = record_rollout(config, digest.policy, digest.steps)
    first = None
    for t, (a, b) in enumerate(zip(digest.hashes, fresh.hashes)):
        if a != b:
            first = t
            break
    return VerifyResult(ok=first is None, first_divergence=first, recomputed=fresh)
