"""Color and video distractors applied inside the observation path.

Color mode adds a per-env RGB bias (resampled every step) to the whole
image with saturating arithmetic. Video mode replaces background pixels
(sky, and floor when it is configured as background) with the current
frame of a per-episode video, advanced one frame per step with ping-pong
reflection at the ends. All randomness flows through explicit keys; env i
never reads env j's key or state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .prng import Key, fold_in_many, index_from_words, split, words_per_key
from .render import Frame
from .threading_utils import parallel_over_ranges
from .video_pack import VideoPack, load_video_pack  # noqa: F401  (re-export)

__all__ = [
    "DistractorState",
    "init_distractors",
    "advance_distractors",
    "apply_color",
    "apply_video",
    "COLOR_BIAS_RANGE",
]

COLOR_BIAS_RANGE = 60  # biases are uniform integers in [-60, 60]
_MODES = ("none", "color", "video")


@dataclass
class DistractorState:
    """Per-env distractor bookkeeping; arrays are empty when mode is none."""

    mode: str
    color_bias: np.ndarray  # (batch, 3) int16
    video_index: np.ndarray  # (batch,) int64
    frame_cursor: np.ndarray  # (batch,) int64
    direction: np.ndarray  # (batch,) int8
    frame_count: np.ndarray  # (batch,) int64, length of each env's video

    def copy(self) -> "DistractorState":
        return DistractorState(
            self.mode,
            self.color_bias.copy(),
            self.video_index.copy(),
            self.frame_cursor.copy(),
            self.direction.copy(),
            self.frame_count.copy(),
        )


def _empty(mode: str) -> DistractorState:
    z = np.zeros(0, dtype=np.int64)
    return DistractorState(
        mode, np.zeros((0, 3), np.int16), z, z.copy(),
        np.zeros(0, np.int8), z.copy(),
    )


def _sample_biases(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """One bias triple per key, each channel uniform on [-60, 60]."""
    w0, w1 = words_per_key(hi, lo, 0)
    w2, _ = words_per_key(hi, lo, 1)
    out = np.empty((hi.shape[0], 3), dtype=np.int16)
    span = 2 * COLOR_BIAS_RANGE + 1
    for c, w in enumerate((w0, w1, w2)):
        out[:, c] = index_from_words(w, span) - COLOR_BIAS_RANGE
    return out


def sample_video_indices(hi: np.ndarray, lo: np.ndarray, n_videos: int) -> np.ndarray:
    w0, _ = words_per_key(hi, lo, 2)
    return index_from_words(w0, n_videos)


def init_distractors(
    mode: str,
    pack: VideoPack | None,
    key: Key,
    batch: int,
    env_offset: int = 0,
) -> DistractorState:
    """Fresh distractor state with one subkey per env."""
    if mode not in _MODES:
        raise ValueError(f"unknown distractor mode {mode!r}")
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if mode == "none":
        return _empty(mode)
    keys = split(key, env_offset + batch)[env_offset:]
    hi = np.array([k.hi for k in keys], dtype=np.uint64)
    lo = np.array([k.lo for k in keys], dtype=np.uint64)
    if mode == "color":
        state = _empty(mode)
        state.color_bias = _sample_biases(hi, lo)
        return state
    if pack is None:
        raise ValueError("video distractors need a loaded video pack")
    vidx = sample_video_indices(hi, lo, pack.video_count)
    return DistractorState(
        mode="video",
        color_bias=np.zeros((batch, 3), np.int16),
        video_index=vidx,
        frame_cursor=np.zeros(batch, np.int64),
        direction=np.ones(batch, np.int8),
        frame_count=pack.frame_counts[vidx],
    )


def advance_distractors(state: DistractorState, key_t: Key, env_offset: int = 0) -> DistractorState:
    """Per-step update: resample color biases / advance video cursors.

    Pure: same (state, key_t) always yields the same result. Color biases
    for env i derive from fold_in(key_t, env_offset + i).
    """
    out = state.copy()
    if state.mode == "color":
        batch = state.color_bias.shape[0]
        hi, lo = fold_in_many(key_t, env_offset + np.arange(batch, dtype=np.uint64))
        out.color_bias = _sample_biases(hi, lo)
    elif state.mode == "video":
        nxt = out.frame_cursor + out.direction
        hi_end = nxt >= out.frame_count
        lo_end = nxt < 0
        # Ping-pong: reflect instead of wrapping so playback never jumps.
        nxt[hi_end] = out.frame_count[hi_end] - 2
        out.direction[hi_end] = -1
        nxt[lo_end] = 1
        out.direction[lo_end] = 1
        out.frame_cursor = nxt
    return out


@njit(cache=True, nogil=True)
def _color_kernel(pixels, bias):
    batch, h, w, _ = pixels.shape
    n = h * w
    # Saturating add via a per-channel lookup table: 768 table entries per
    # env instead of a clamp branch per pixel.
    lut = np.empty((3, 256), dtype=np.uint8)
    for b in range(batch):
        for c in range(3):
            off = bias[b, c]
            for v in range(256):
                s = v + off
                if s < 0:
                    s = 0
                elif s > 255:
                    s = 255
                lut[c, v] = np.uint8(s)
        flat = pixels[b].reshape(n, 3)
        for i in range(n):
            flat[i, 0] = lut[0, flat[i, 0]]
            flat[i, 1] = lut[1, flat[i, 1]]
            flat[i, 2] = lut[2, flat[i, 2]]


@njit(cache=True, nogil=True)
def _video_kernel(pixels, depth, frames_flat, frame_idx, row_map, col_map):
    batch, h, w, _ = pixels.shape
    for b in range(batch):
        fi = frame_idx[b]
        for y in range(h):
            sy = row_map[y]
            for x in range(w):
                if np.isinf(depth[b, y, x]):
                    sx = col_map[x]
                    pixels[b, y, x, 0] = frames_flat[fi, sy, sx, 0]
                    pixels[b, y, x, 1] = frames_flat[fi, sy, sx, 1]
                    pixels[b, y, x, 2] = frames_flat[fi, sy, sx, 2]


def nearest_map(dst: int, src: int) -> np.ndarray:
    """Nearest-neighbor source row/column for each destination index."""
    return (np.arange(dst, dtype=np.int64) * src) // dst


def apply_color_inplace(frame: Frame, state: DistractorState, threads: int = 1) -> None:
    if state.mode != "color":
        raise ValueError(f"apply_color needs mode=color, got {state.mode!r}")
    if frame.batch != state.color_bias.shape[0]:
        raise ValueError("frame batch does not match distractor state")
    bias = state.color_bias.astype(np.int64)
    parallel_over_ranges(
        frame.batch, threads,
        lambda lo, hi: _color_kernel(frame.pixels[lo:hi], bias[lo:hi]),
    )


def apply_video_inplace(
    frame: Frame, pack: VideoPack, state: DistractorState, threads: int = 1
) -> None:
    if state.mode != "video":
        raise ValueError(f"apply_video needs mode=video, got {state.mode!r}")
    if frame.batch != state.video_index.shape[0]:
        raise ValueError("frame batch does not match distractor state")
    frames_flat, starts = pack.flat_frames()
    frame_idx = starts[state.video_index] + state.frame_cursor
    h, w = frame.pixels.shape[1:3]
    row_map = nearest_map(h, pack.height)
    col_map = nearest_map(w, pack.width)
    parallel_over_ranges(
        frame.batch, threads,
        lambda lo, hi: _video_kernel(
            frame.pixels[lo:hi], frame.depth[lo:hi], frames_flat,
            frame_idx[lo:hi], row_map, col_map,
        ),
    )


def apply_color(frame: Frame, state: DistractorState) -> Frame:
    """Pure variant: returns a new frame with the bias applied everywhere."""
    out = Frame(frame.pixels.copy(), frame.depth.copy())
    apply_color_inplace(out, state)
    return out


def apply_video(frame: Frame, pack: VideoPack, state: DistractorState) -> Frame:
    """Pure variant: background pixels replaced, foreground untouched."""
    out = Frame(frame.pixels.copy(), frame.depth.copy())
    apply_video_inplace(out, pack, state)
    return out
