import dataclasses

import numpy as np
import pytest

from pixelctrl.env import (
    EnvConfig,
    load_env_config,
    make_env,
    observe,
    save_env_config,
    step,
)
from pixelctrl.prng import fold_in, key_from_seed, uniform


def random_actions(env, state, t, seed=123):
    """Per-env action stream that only depends on the env's global index."""
    k = fold_in(key_from_seed(seed), t)
    cfg = env.config
    return np.stack(
        [
            uniform(fold_in(k, cfg.env_offset + i), env.n_joints, -1.0, 1.0)
            for i in range(cfg.batch)
        ]
    )


class TestMake:
    def test_purity(self):
        cfg = EnvConfig(model="hopper_lite", batch=2, seed=3)
        _, s1, o1 = make_env(cfg)
        _, s2, o2 = make_env(cfg)
        assert np.array_equal(o1, o2)
        assert np.array_equal(s1.sys.qpos, s2.sys.qpos)

    def test_obs_shape_rgb(self):
        cfg = EnvConfig(batch=3, width=32, height=24)
        env, _, obs = make_env(cfg)
        assert obs.shape == (3, 24, 32, 3)
        assert obs.dtype == np.uint8
        assert env.obs_shape == (24, 32, 3)

    def test_obs_shape_grayscale(self):
        cfg = EnvConfig(batch=2, width=32, height=32, observation="grayscale")
        _, _, obs = make_env(cfg)
        assert obs.shape == (2, 32, 32, 1)

    def test_grayscale_formula(self):
        cfg_rgb = EnvConfig(batch=1, width=32, height=32, seed=5)
        cfg_gray = dataclasses.replace(cfg_rgb, observation="grayscale")
        _, _, rgb = make_env(cfg_rgb)
        _, _, gray = make_env(cfg_gray)
        p = rgb.astype(np.uint32)
        want = (299 * p[..., 0] + 587 * p[..., 1] + 114 * p[..., 2] + 500) // 1000
        assert np.array_equal(gray[..., 0], want.astype(np.uint8))

    def test_seeds_differ(self):
        _, _, a = make_env(EnvConfig(batch=1, seed=0))
        _, _, b = make_env(EnvConfig(batch=1, seed=1))
        assert not np.array_equal(a, b)

    def test_unknown_model(self):
        with pytest.raises(ValueError, match="builtin"):
            make_env(EnvConfig(model="no_such_model"))

    def test_video_mode_needs_pack(self):
        with pytest.raises(ValueError, match="video_pack_path"):
            make_env(EnvConfig(distractor_mode="video"))


class TestStep:
    def test_step_advances_and_rewards(self):
        env, state, _ = make_env(EnvConfig(model="cheetah_lite", batch=2, seed=1))
        state, out = step(env, state, np.zeros((2, env.n_joints)))
        assert state.t == 1
        assert out.obs.shape == (2, 84, 84, 3)
        assert out.reward.shape == (2,)
        assert not out.done.any()

    def test_purity(self):
        cfg = EnvConfig(model="hopper_lite", batch=2, seed=2, width=32, height=32)
        env, state, _ = make_env(cfg)
        acts = random_actions(env, state, 0)
        _, a = step(env, state, acts)
        env2, state2, _ = make_env(cfg)
        _, b = step(env2, state2, acts)
        assert np.array_equal(a.obs, b.obs)
        assert np.array_equal(a.reward, b.reward)

    def test_observe_matches_step_obs(self):
        env, state, _ = make_env(EnvConfig(batch=2, seed=4, width=32, height=32))
        for t in range(3):
            state, out = step(env, state, random_actions(env, state, t))
        assert np.array_equal(observe(env, state), out.obs)

    def test_action_repeat_accumulates_reward(self):
        base = EnvConfig(model="cheetah_lite", batch=1, seed=6, width=32, height=32)
        env1, s1, _ = make_env(base)
        env2, s2, _ = make_env(dataclasses.replace(base, action_repeat=2))
        acts = np.full((1, env1.n_joints), 0.5)
        s1, o1 = step(env1, s1, acts)
        s1, o1b = step(env1, s1, acts)
        s2, o2 = step(env2, s2, acts)
        assert np.array_equal(s1.sys.qpos, s2.sys.qpos)
        assert o2.reward[0] == pytest.approx(o1.reward[0] + o1b.reward[0])

    def test_shape_mismatch(self):
        env, state, _ = make_env(EnvConfig(batch=2))
        with pytest.raises(ValueError):
            step(env, state, np.zeros((2, env.n_joints + 1)))

    def test_out_of_range_actions_clamped(self):
        env, state, _ = make_env(EnvConfig(batch=1, seed=7, width=32, height=32))
        _, a = step(env, state, np.full((1, env.n_joints), 9.0))
        _, b = step(env, state, np.ones((1, env.n_joints)))
        assert np.array_equal(a.obs, b.obs)
        assert np.array_equal(a.reward, b.reward)


class TestAutoReset:
    def test_episode_boundary(self):
        spec_len = 1000
        env, state, _ = make_env(
            EnvConfig(model="cheetah_lite", batch=1, seed=8, width=32, height=32)
        )
        assert env.spec.episode_length == spec_len
        # Fast-forward the step counter instead of stepping 1000 times.
        state.sys.step_count[:] = spec_len - 1
        state, out = step(env, state, np.zeros((1, env.n_joints)))
        assert out.done[0]
        assert out.info["episode_length"][0] > 0
        # The in-band convention: the obs already belongs to the new episode.
        assert state.sys.step_count[0] == 0
        assert state.episode_length[0] == 0
        assert state.episode_return[0] == 0.0

    def test_walker_fall_terminates(self):
        env, state, _ = make_env(
            EnvConfig(model="walker_lite", batch=1, seed=9, width=32, height=32)
        )
        done = False
        for t in range(300):
            state, out = step(env, state, random_actions(env, state, t))
            if out.done[0]:
                done = True
                assert out.info["episode_length"][0] == t + 1
                break
        assert done, "random walker should fall within 300 steps"

    def test_info_zero_when_not_done(self):
        env, state, _ = make_env(EnvConfig(batch=2, seed=10, width=32, height=32))
        state, out = step(env, state, np.zeros((2, env.n_joints)))
        assert not out.done.any()
        assert np.all(out.info["episode_return"] == 0.0)
        assert np.all(out.info["episode_length"] == 0)

    def test_running_totals(self):
        env, state, _ = make_env(EnvConfig(batch=1, seed=11, width=32, height=32))
        total = 0.0
        for t in range(5):
            state, out = step(env, state, random_actions(env, state, t))
            total += out.reward[0]
        assert state.episode_return[0] == pytest.approx(total)
        assert state.episode_length[0] == 5


class TestBatchIndependence:
    @pytest.mark.parametrize("mode", ["none", "color"])
    def test_slice_impersonation(self, mode):
        big_cfg = EnvConfig(
            model="hopper_lite", batch=6, seed=12, width=32, height=32,
            distractor_mode=mode,
        )
        env_b, state_b, obs_b0 = make_env(big_cfg)
        i = 4
        small_cfg = dataclasses.replace(
            big_cfg, batch=1, logical_batch=6, env_offset=i
        )
        env_s, state_s, obs_s0 = make_env(small_cfg)
        assert np.array_equal(obs_s0[0], obs_b0[i])
        for t in range(20):
            acts_b = random_actions(env_b, state_b, t)
            acts_s = random_actions(env_s, state_s, t)
            assert np.array_equal(acts_s[0], acts_b[i])
            state_b, out_b = step(env_b, state_b, acts_b)
            state_s, out_s = step(env_s, state_s, acts_s)
            assert np.array_equal(out_s.obs[0], out_b.obs[i])
            assert out_s.reward[0] == out_b.reward[i]

    def test_video_slice_impersonation(self, pack_path):
        big_cfg = EnvConfig(
            model="cheetah_lite", batch=4, seed=13, width=32, height=32,
            distractor_mode="video", video_pack_path=pack_path,
        )
        env_b, state_b, obs_b0 = make_env(big_cfg)
        i = 2
        small_cfg = dataclasses.replace(
            big_cfg, batch=1, logical_batch=4, env_offset=i
        )
        env_s, state_s, obs_s0 = make_env(small_cfg)
        assert np.array_equal(obs_s0[0], obs_b0[i])
        for t in range(10):
            state_b, out_b = step(env_b, state_b, random_actions(env_b, state_b, t))
            state_s, out_s = step(env_s, state_s, random_actions(env_s, state_s, t))
            assert np.array_equal(out_s.obs[0], out_b.obs[i])

    def test_thread_invariance(self):
        base = EnvConfig(model="walker_lite", batch=4, seed=14, width=32, height=32)
        outs = []
        for threads in (1, 3):
            env, state, _ = make_env(dataclasses.replace(base, threads=threads))
            for t in range(5):
                state, out = step(env, state, random_actions(env, state, t))
            outs.append(out.obs)
        assert np.array_equal(outs[0], outs[1])


class TestDistractorModes:
    def test_color_mode_changes_pixels(self):
        base = EnvConfig(batch=1, seed=15, width=32, height=32)
        _, _, plain = make_env(base)
        _, _, colored = make_env(dataclasses.replace(base, distractor_mode="color"))
        assert not np.array_equal(plain, colored)

    def test_video_foreground_matches_none(self, pack_path):
        base = EnvConfig(
            batch=1, seed=16, width=32, height=32, floor_in_background=True
        )
        env_n, state_n, obs_n = make_env(base)
        vid_cfg = dataclasses.replace(
            base, distractor_mode="video", video_pack_path=pack_path
        )
        env_v, state_v, obs_v = make_env(vid_cfg)
        # Foreground (robot) pixels are identical; only background differs.
        frame = env_n._render_frame(state_n.sys, state_n.distractor)
        fg = ~frame.background_mask
        assert np.array_equal(obs_n[fg], obs_v[fg])
        assert np.any(obs_n[~fg] != obs_v[~fg])

    def test_video_floor_defaults_to_background(self, pack_path):
        cfg = EnvConfig(
            distractor_mode="video", video_pack_path=pack_path
        )
        assert cfg.resolved_floor_in_background is True
        assert EnvConfig().resolved_floor_in_background is False


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        cfg = EnvConfig(
            model="walker_lite", batch=7, width=64, height=48,
            distractor_mode="color", action_repeat=2, observation="grayscale",
            floor_in_background=True, seed=99, threads=2,
            logical_batch=16, env_offset=3,
        )
        path = tmp_path / "env.cfg"
        save_env_config(cfg, path)
        assert load_env_config(path) == cfg

    def test_defaults_round_trip(self, tmp_path):
        path = tmp_path / "env.cfg"
        save_env_config(EnvConfig(), path)
        assert load_env_config(path) == EnvConfig()

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "env.cfg"
        save_env_config(EnvConfig(batch=2), path)
        assert load_env_config(path, batch=5).batch == 5

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "env.cfg"
        path.write_text("bogus = 1\n")
        with pytest.raises(ValueError, match="bogus"):
            load_env_config(path)

    def test_validation_on_load(self, tmp_path):
        path = tmp_path / "env.cfg"
        path.write_text("batch = 0\n")
        with pytest.raises(ValueError, match="batch"):
            load_env_config(path)
