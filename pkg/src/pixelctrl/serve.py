"""Line-oriented environment protocol over stdin/stdout.

One JSON object per line in each direction; observations travel base64-
encoded so the stream stays text-safe. A serve process hosts one env at a
time. Requests:

    {"cmd": "make", "config": {...EnvConfig fields...}}
        -> {"ok": true, "batch": B, "obs_shape": [H, W, C],
            "n_joints": J, "obs_b64": ...}
    {"cmd": "step", "actions": [[...], ...]}
        -> {"ok": true, "obs_b64": ..., "reward": [...], "done": [...],
            "episode_return": [...], "episode_length": [...], "t": n}
    {"cmd": "observe"} -> {"ok": true, "obs_b64": ...}
    {"cmd": "close"}   -> {"ok": true} and the process exits

Any failure yields {"ok": false, "error": msg} and the env survives.
"""

from __future__ import annotations

import base64
import json
import sys

import numpy as np

from .env import Env, EnvConfig, EnvState, make_env, observe, step

__all__ = ["serve_stdio"]


class _Session:
    def __init__(self):
        self.env: Env | None = None
        self.state: EnvState | None = None

    def handle(self, req: dict) -> dict:
        cmd = req.get("cmd")
        if cmd == "make":
            return self._make(req)
        if cmd == "close":
            return {"ok": True, "closing": True}
        if self.env is None:
            return {"ok": False, "error": "no env; send make first"}
        if cmd == "step":
            return self._step(req)
        if cmd == "observe":
            return {"ok": True, "obs_b64": _b64(observe(self.env, self.state))}
        return {"ok": False, "error": f"unknown cmd {cmd!r}"}

    def _make(self, req: dict) -> dict:
        config = EnvConfig(**req.get("config", {}))
        env, state, obs = make_env(config)
        self.env, self.state = env, state
        h, w, c = env.obs_shape
        return {
            "ok": True,
            "batch": config.batch,
            "obs_shape": [h, w, c],
            "n_joints": env.n_joints,
            "obs_b64": _b64(obs),
        }

    def _step(self, req: dict) -> dict:
        actions = np.asarray(req["actions"], dtype=np.float64)
        self.state, out = step(self.env, self.state, actions)
        return {
            "ok": True,
            "obs_b64": _b64(out.obs),
            "reward": out.reward.tolist(),
            "done": out.done.tolist(),
            "episode_return": out.info["episode_return"].tolist(),
            "episode_length": out.info["episode_length"].tolist(),
            "t": self.state.t,
        }


def _b64(obs: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(obs).tobytes()).decode("ascii")


def serve_stdio(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = _Session()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            resp = session.handle(req)
        except Exception as e:  # malformed input must not kill the server
            resp = {"ok": False, "error": str(e)}
        stdout.write(json.dumps(resp) + "\n")
        stdout.flush()
        if resp.get("closing"):
            return 0
    return 0
