#!/usr/bin/env python3
"""Render a still frame of each builtin model in each distractor mode.

Usage:
    python scripts/render_stills.py [out_dir] [steps]

Steps each env a short while with a random policy first so the stills show
mid-episode configurations rather than the rest pose.
"""

import os
import sys

from pixelctrl.env import EnvConfig, make_env, step
from pixelctrl.models import BUILTIN_MODELS
from pixelctrl.recorder import make_policy, write_png

PACK = os.path.join(os.path.dirname(__file__), "..", "assets", "synthetic_pack.pxvp")


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "stills"
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 40
    os.makedirs(out_dir, exist_ok=True)
    for model in sorted(BUILTIN_MODELS):
        for mode in ("none", "color", "video"):
            config = EnvConfig(
                model=model,
                batch=1,
                distractor_mode=mode,
                video_pack_path=PACK if mode == "video" else None,
                seed=7,
            )
            env, state, obs = make_env(config)
            policy = make_policy("random:1", env)
            for t in range(steps):
                state, out = step(env, state, policy(obs, t))
                obs = out.obs
            path = os.path.join(out_dir, f"{model}_{mode}.png")
            write_png(obs[0], path)
            print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
