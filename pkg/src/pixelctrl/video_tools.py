"""Video-pack ingestion and generation.

``pack_from_frames`` front-loads all disk work into a one-time pack build:
it reads per-video directories of numbered PPM (binary P6) frames, resizes
them with nearest-neighbor sampling, and writes a PXVP container.
``generate_synthetic_pack`` procedurally generates moving color gradients
so tests and benchmarks never need an external dataset.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .distractor import nearest_map
from .prng import Key, fold_in, uniform
from .video_pack import VideoPack, save_video_pack

__all__ = ["PackSummary", "pack_from_frames", "generate_synthetic_pack", "read_ppm"]


@dataclass(frozen=True)
class PackSummary:
    videos: int
    total_frames: int
    bytes: int


def read_ppm(path) -> np.ndarray:
    """Decode a binary (P6) PPM file into an (H, W, 3) uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    try:
        fields: list[bytes] = []
        pos = 0
        while len(fields) < 4:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        if fields[0] != b"P6":
            raise ValueError("not a binary P6 PPM")
        width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
        if maxval != 255:
            raise ValueError(f"unsupported maxval {maxval}")
        pos += 1  # single whitespace after maxval
        pixels = np.frombuffer(data, dtype=np.uint8, count=height * width * 3, offset=pos)
        if pixels.size != height * width * 3:
            raise ValueError("pixel data truncated")
    except (ValueError, IndexError) as e:
        raise ValueError(f"{path}: cannot decode PPM ({e})") from None
    return pixels.reshape(height, width, 3).copy()


def write_ppm(frame: np.ndarray, path) -> None:
    """Inverse of read_ppm; used by tests and the frame-directory tooling."""
    h, w = frame.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(frame, dtype=np.uint8).tobytes())


def _resize_nearest(frame: np.ndarray, height: int, width: int) -> np.ndarray:
    rows = nearest_map(height, frame.shape[0])
    cols = nearest_map(width, frame.shape[1])
    return frame[rows][:, cols]


def pack_from_frames(root, out_path, height: int, width: int) -> PackSummary:
    """Build a PXVP pack from per-video subdirectories of PPM frames.

    Videos are ordered by subdirectory name ascending, frames by filename
    ascending; every frame is nearest-neighbor resized to (height, width).
    """
    subdirs = sorted(
        d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d))
    )
    if not subdirs:
        raise ValueError(f"{root}: no video subdirectories")
    videos = []
    total = 0
    for sub in subdirs:
        subpath = os.path.join(root, sub)
        names = sorted(n for n in os.listdir(subpath) if not n.startswith("."))
        frames = [
            _resize_nearest(read_ppm(os.path.join(subpath, n)), height, width)
            for n in names
        ]
        if len(frames) < 2:
            raise ValueError(f"{subpath}: a video needs at least 2 frames")
        videos.append(np.stack(frames).astype(np.uint8))
        total += len(frames)
    pack = VideoPack(videos=videos, height=height, width=width)
    nbytes = save_video_pack(pack, out_path)
    return PackSummary(videos=len(videos), total_frames=total, bytes=nbytes)


def generate_synthetic_pack(
    key: Key, videos: int, frames: int, height: int, width: int, out_path
) -> PackSummary:
    """Write a pack of procedurally moving color gradients; pure in ``key``."""
    if videos < 1 or frames < 2 or height < 1 or width < 1:
        raise ValueError("need videos >= 1, frames >= 2, positive dimensions")
    u = (np.arange(width, dtype=np.float64) + 0.5) / width
    v = (np.arange(height, dtype=np.float64) + 0.5) / height
    uu, vv = np.meshgrid(u, v)
    vids = []
    total = 0
    for vid in range(videos):
        params = uniform(fold_in(key, vid), 12)
        out = np.empty((frames, height, width, 3), dtype=np.uint8)
        for c in range(3):
            fx = 0.5 + 2.0 * params[4 * c + 0]
            fy = 0.5 + 2.0 * params[4 * c + 1]
            speed = 0.5 + 1.5 * params[4 * c + 2]
            phase = params[4 * c + 3]
            for f in range(frames):
                wave = np.sin(
                    2.0 * np.pi * (fx * uu + fy * vv + phase) + speed * f * 0.35
                )
                out[f, :, :, c] = np.round(127.5 * (1.0 + wave)).astype(np.uint8)
        vids.append(out)
        total += frames
    pack = VideoPack(videos=vids, height=height, width=width)
    nbytes = save_video_pack(pack, out_path)
    return PackSummary(videos=videos, total_frames=total, bytes=nbytes)
