"""Memory-resident video container (PXVP).

Layout, all integers little-endian u32, frames raw row-major RGB bytes:

    magic "PXVP" | version = 1 | video_count | Hv | Wv
    per video: frame_count | frame_count * Hv * Wv * 3 bytes
    trailing SHA-256 digest (32 bytes) of all preceding bytes

Loading decodes the whole pack into memory in one pass; nothing in the
step path ever touches the file again.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

__all__ = ["VideoPack", "PackFormatError", "load_video_pack", "save_video_pack"]

MAGIC = b"PXVP"
VERSION = 1
DIGEST_BYTES = 32


class PackFormatError(ValueError):
    """Malformed pack file; the message names the offending byte offset."""


@dataclass
class VideoPack:
    videos: list[np.ndarray]  # each (frame_count, Hv, Wv, 3) uint8
    height: int
    width: int

    @property
    def video_count(self) -> int:
        return len(self.videos)

    @property
    def frame_counts(self) -> np.ndarray:
        return np.array([len(v) for v in self.videos], dtype=np.int64)

    def flat_frames(self) -> tuple[np.ndarray, np.ndarray]:
        """All frames stacked, plus per-video start offsets (kernel layout).

        Built once and cached; the stacked array is what stays resident for
        the whole run.
        """
        cached = getattr(self, "_flat", None)
        if cached is None:
            starts = np.zeros(self.video_count, dtype=np.int64)
            total = 0
            for i, v in enumerate(self.videos):
                starts[i] = total
                total += len(v)
            cached = (np.concatenate(self.videos, axis=0), starts)
            object.__setattr__(self, "_flat", cached)
        return cached


def save_video_pack(pack: VideoPack, path) -> int:
    """Write the container; returns the file size in bytes."""
    if pack.video_count < 1:
        raise ValueError("pack needs at least one video")
    parts = [MAGIC, struct.pack("<III", VERSION, pack.video_count, pack.height)]
    parts.append(struct.pack("<I", pack.width))
    for v in pack.videos:
        if v.ndim != 4 or v.shape[1:] != (pack.height, pack.width, 3):
            raise ValueError(f"video shaped {v.shape} does not match pack dimensions")
        if len(v) < 2:
            raise ValueError("every video needs at least 2 frames")
        parts.append(struct.pack("<I", len(v)))
        parts.append(np.ascontiguousarray(v, dtype=np.uint8).tobytes())
    body = b"".join(parts)
    digest = hashlib.sha256(body).digest()
    with open(path, "wb") as f:
        f.write(body)
        f.write(digest)
    return len(body) + DIGEST_BYTES


def load_video_pack(path) -> VideoPack:
    """Decode a PXVP file fully into memory; atomic (no partial packs)."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 + DIGEST_BYTES:
        raise PackFormatError(f"{path}: truncated header at byte {len(data)}")
    if data[:4] != MAGIC:
        raise PackFormatError(f"{path}: bad magic at byte 0")
    # Header is magic(4) + version(4) + video_count(4) + Hv(4) + Wv(4).
    version, video_count, height, width = struct.unpack_from("<IIII", data, 4)
    if version != VERSION:
        raise PackFormatError(f"{path}: unsupported version {version} at byte 4")
    if video_count < 1 or height < 1 or width < 1:
        raise PackFormatError(f"{path}: bad dimensions in header at byte 8")
    body_end = len(data) - DIGEST_BYTES
    offset = 20
    videos: list[np.ndarray] = []
    frame_bytes = height * width * 3
    for i in range(video_count):
        if offset + 4 > body_end:
            raise PackFormatError(f"{path}: truncated video {i} header at byte {offset}")
        (frame_count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if frame_count < 2:
            raise PackFormatError(
                f"{path}: video {i} has {frame_count} frames at byte {offset - 4}"
            )
        nbytes = frame_count * frame_bytes
        if offset + nbytes > body_end:
            raise PackFormatError(f"{path}: truncated frames for video {i} at byte {offset}")
        frames = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=offset)
        videos.append(frames.reshape(frame_count, height, width, 3).copy())
        offset += nbytes
    if offset != body_end:
        raise PackFormatError(f"{path}: {body_end - offset} trailing bytes at byte {offset}")
    digest = hashlib.sha256(data[:body_end]).digest()
    if digest != data[body_end:]:
        raise PackFormatError(f"{path}: digest mismatch at byte {body_end}")
    return VideoPack(videos=videos, height=height, width=width)
