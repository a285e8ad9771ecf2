"""User-facing batched environment: physics + renderer + distractors.

``step`` is a pure function of (state, actions): dynamics advance
``action_repeat`` times, distractors advance once, finished envs auto-reset
in-band (the returned observation for a done env is the first observation
of its new episode, with the finished episode's totals in ``info``), and
the observation is rendered, distracted, and postprocessed without any
external renderer or per-step I/O.

Key discipline: ``key_t = fold_in(master_key, t)`` drives everything at
step t; env i's reset key is ``fold_in(key_t, logical_batch + i)``, which
never collides with the distractor keys ``fold_in(key_t, i)``. A small
batch can reproduce a slice of a larger layout exactly by setting
``logical_batch``/``env_offset``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import distractor as dist_mod
from .distractor import DistractorState, advance_distractors, init_distractors
from .models import BUILTIN_MODELS, ModelSpec, builtin_model, load_model
from .physics import SystemState, compute_reward, forward_kinematics, model_arrays, step_dynamics
from .prng import Key, fold_in, fold_in_many, key_from_seed, normal, uniform
from .render import CameraConfig, Frame, RobotGeometry, render_robot_batch
from .video_pack import VideoPack, load_video_pack

__all__ = [
    "EnvConfig",
    "EnvState",
    "StepOutput",
    "Env",
    "make_env",
    "step",
    "observe",
    "load_env_config",
    "save_env_config",
]


@dataclass(frozen=True)
class EnvConfig:
    model: str = "cheetah_lite"  # builtin name or model-file path
    batch: int = 1
    width: int = 84
    height: int = 84
    distractor_mode: str = "none"  # none | color | video
    video_pack_path: str | None = None
    action_repeat: int = 1
    observation: str = "rgb"  # rgb | grayscale
    floor_in_background: bool | None = None  # None: floor joins bg in video mode
    seed: int = 0
    threads: int = 1
    # Vectorization-debugging knobs: impersonate envs [env_offset,
    # env_offset + batch) of a layout with logical_batch total envs.
    logical_batch: int | None = None
    env_offset: int = 0

    def validate(self) -> None:
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.width < 8 or self.height < 8:
            raise ValueError("width and height must be >= 8")
        if self.distractor_mode not in ("none", "color", "video"):
            raise ValueError(f"unknown distractor_mode {self.distractor_mode!r}")
        if self.distractor_mode == "video" and not self.video_pack_path:
            raise ValueError("video distractors need video_pack_path")
        if self.action_repeat < 1:
            raise ValueError("action_repeat must be >= 1")
        if self.observation not in ("rgb", "grayscale"):
            raise ValueError(f"unknown observation {self.observation!r}")
        if self.logical_batch is not None and (
            self.logical_batch < self.env_offset + self.batch
        ):
            raise ValueError("logical_batch too small for env_offset + batch")

    @property
    def resolved_floor_in_background(self) -> bool:
        if self.floor_in_background is None:
            return self.distractor_mode == "video"
        return self.floor_in_background


@dataclass
class EnvState:
    sys: SystemState
    distractor: DistractorState
    master_key: Key
    t: int
    episode_return: np.ndarray  # (batch,) float64, running totals
    episode_length: np.ndarray  # (batch,) int64


@dataclass
class StepOutput:
    obs: np.ndarray  # (batch, H, W, 3) or (batch, H, W, 1) uint8
    reward: np.ndarray  # (batch,) float64
    done: np.ndarray  # (batch,) bool
    info: dict  # episode_return / episode_length, valid where done


class Env:
    """Immutable environment definition; shareable across threads."""

    def __init__(self, config: EnvConfig):
        config.validate()
        self.config = config
        if config.model in BUILTIN_MODELS:
            self.spec: ModelSpec = builtin_model(config.model)
        elif os.path.exists(config.model):
            self.spec = load_model(config.model)
        else:
            raise ValueError(
                f"model {config.model!r} is neither a builtin nor a file"
            )
        arrs = model_arrays(self.spec)
        self.geometry = RobotGeometry(arrs.length, arrs.radius)
        self.camera = CameraConfig()
        self.pack: VideoPack | None = None
        if config.distractor_mode == "video":
            self.pack = load_video_pack(config.video_pack_path)
            self.pack.flat_frames()  # make the full pack resident up front
        self.logical_batch = (
            config.logical_batch if config.logical_batch is not None else config.batch
        )

    @property
    def n_joints(self) -> int:
        return self.spec.n_joints

    @property
    def obs_shape(self) -> tuple[int, int, int]:
        channels = 1 if self.config.observation == "grayscale" else 3
        return (self.config.height, self.config.width, channels)

    # ---------------- internal helpers ----------------

    def _reset_rows(self, key_hi: np.ndarray, key_lo: np.ndarray):
        """Reset-noise draws for one env per (hi, lo) key pair."""
        dof = self.spec.dof
        rest = self.spec.rest()
        n = key_hi.shape[0]
        qpos = np.empty((n, dof))
        qvel = np.empty((n, dof))
        for j in range(n):
            k = Key(int(key_hi[j]), int(key_lo[j]))
            qpos[j] = rest + uniform(fold_in(k, 0), dof, -0.1, 0.1)
            qvel[j] = normal(fold_in(k, 1), dof) * 0.05
        return qpos, qvel

    def _render_frame(self, sys: SystemState, dist: DistractorState) -> Frame:
        cfg = self.config
        poses = forward_kinematics(self.spec, sys.qpos)
        frame = render_robot_batch(
            self.geometry, poses, self.camera, cfg.width, cfg.height,
            cfg.resolved_floor_in_background, threads=cfg.threads,
        )
        if dist.mode == "color":
            dist_mod.apply_color_inplace(frame, dist, threads=cfg.threads)
        elif dist.mode == "video":
            dist_mod.apply_video_inplace(frame, self.pack, dist, threads=cfg.threads)
        return frame

    def _postprocess(self, frame: Frame) -> np.ndarray:
        if self.config.observation == "grayscale":
            p = frame.pixels.astype(np.uint32)
            gray = (299 * p[..., 0] + 587 * p[..., 1] + 114 * p[..., 2] + 500) // 1000
            return gray.astype(np.uint8)[..., None]
        return frame.pixels


def make_env(config: EnvConfig) -> tuple[Env, EnvState, np.ndarray]:
    """Build the env, draw the initial state, render the first observation."""
    env = Env(config)
    master = key_from_seed(config.seed)
    reset_key = fold_in(master, 0x5EED)
    dist_key = fold_in(master, 0xD157)
    from .physics import reset_state

    sys = reset_state(env.spec, reset_key, config.batch, env_offset=config.env_offset)
    dist = init_distractors(
        config.distractor_mode, env.pack, dist_key, config.batch,
        env_offset=config.env_offset,
    )
    state = EnvState(
        sys=sys,
        distractor=dist,
        master_key=master,
        t=0,
        episode_return=np.zeros(config.batch),
        episode_length=np.zeros(config.batch, dtype=np.int64),
    )
    obs = env._postprocess(env._render_frame(sys, dist))
    return env, state, obs


def step(env: Env, state: EnvState, actions: np.ndarray) -> tuple[EnvState, StepOutput]:
    """Advance one control step; auto-resets finished envs in-band."""
    cfg = env.config
    actions = np.asarray(actions, dtype=np.float64)
    if actions.shape != (cfg.batch, env.n_joints):
        raise ValueError(
            f"actions must be {(cfg.batch, env.n_joints)}, got {actions.shape}"
        )
    key_t = fold_in(state.master_key, state.t)
    sys = state.sys
    reward = np.zeros(cfg.batch)
    for _ in range(cfg.action_repeat):
        new_sys = step_dynamics(env.spec, sys, actions, threads=cfg.threads)
        reward += compute_reward(env.spec, sys, new_sys, actions)
        sys = new_sys
    done = sys.done.copy()
    dist = advance_distractors(state.distractor, key_t, env_offset=cfg.env_offset)

    ep_return = state.episode_return + reward
    ep_length = state.episode_length + 1
    info = {
        "episode_return": np.where(done, ep_return, 0.0),
        "episode_length": np.where(done, ep_length, 0),
    }

    if done.any():
        idx = np.nonzero(done)[0]
        global_idx = env.logical_batch + cfg.env_offset + idx.astype(np.uint64)
        hi, lo = fold_in_many(key_t, global_idx)
        qpos, qvel = env._reset_rows(hi, lo)
        sys.qpos[idx] = qpos
        sys.qvel[idx] = qvel
        sys.step_count[idx] = 0
        sys.done[idx] = False
        ep_return = ep_return.copy()
        ep_length = ep_length.copy()
        ep_return[idx] = 0.0
        ep_length[idx] = 0
        if dist.mode == "video":
            vidx = dist_mod.sample_video_indices(hi, lo, env.pack.video_count)
            dist.video_index[idx] = vidx
            dist.frame_cursor[idx] = 0
            dist.direction[idx] = 1
            dist.frame_count[idx] = env.pack.frame_counts[vidx]

    obs = env._postprocess(env._render_frame(sys, dist))
    new_state = EnvState(
        sys=sys,
        distractor=dist,
        master_key=state.master_key,
        t=state.t + 1,
        episode_return=ep_return,
        episode_length=ep_length,
    )
    return new_state, StepOutput(obs=obs, reward=reward, done=done, info=info)


def observe(env: Env, state: EnvState) -> np.ndarray:
    """Pure re-render of the current state's observation."""
    return env._postprocess(env._render_frame(state.sys, state.distractor))


# --------------------------------------------------------------------------
# plain-text config files


_CONFIG_FIELDS = (
    "model", "batch", "width", "height", "distractor_mode", "video_pack_path",
    "action_repeat", "observation", "floor_in_background", "seed", "threads",
    "logical_batch", "env_offset",
)


def save_env_config(config: EnvConfig, path) -> None:
    lines = []
    for name in _CONFIG_FIELDS:
        value = getattr(config, name)
        if value is None:
            value = "none"
        elif isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{name} = {value}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_env_config(path, **overrides) -> EnvConfig:
    """Parse a key-value config file; keyword overrides win."""
    raw: dict[str, str] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
    kwargs: dict = {}
    ints = {"batch", "width", "height", "action_repeat", "seed", "threads", "env_offset"}
    for name, value in raw.items():
        if name not in _CONFIG_FIELDS:
            raise ValueError(f"{path}: unknown config key {name!r}")
        if name in ints:
            kwargs[name] = int(value)
        elif name == "logical_batch":
            kwargs[name] = None if value == "none" else int(value)
        elif name == "floor_in_background":
            kwargs[name] = None if value == "none" else value == "true"
        elif name == "video_pack_path":
            kwargs[name] = None if value == "none" else value
        else:
            kwargs[name] = value
    kwargs.update(overrides)
    config = EnvConfig(**kwargs)
    config.validate()
    return config
