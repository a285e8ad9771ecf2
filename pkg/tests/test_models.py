import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixelctrl.models import (
    BUILTIN_MODELS,
    JointSpec,
    LinkSpec,
    ModelSpec,
    builtin_model,
    load_model,
    save_model,
)


class TestBuiltins:
    def test_roster(self):
        assert set(BUILTIN_MODELS) == {"cheetah_lite", "walker_lite", "hopper_lite"}

    def test_cheetah_shape(self):
        spec = builtin_model("cheetah_lite")
        assert spec.n_links == 7
        assert spec.n_joints == 6
        assert spec.min_root_height is None  # cheetah never terminates early

    def test_walker_shape(self):
        spec = builtin_model("walker_lite")
        assert spec.n_links == 7
        assert spec.n_joints == 6
        assert spec.min_root_height == pytest.approx(0.8)

    def test_hopper_shape(self):
        spec = builtin_model("hopper_lite")
        assert spec.n_links == 4
        assert spec.n_joints == 3
        assert spec.min_root_height == pytest.approx(0.7)

    def test_purity(self):
        assert builtin_model("hopper_lite") == builtin_model("hopper_lite")

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown model"):
            builtin_model("ant_lite")

    def test_defaults(self):
        for name in BUILTIN_MODELS:
            spec = builtin_model(name)
            assert spec.dt == 0.01
            assert spec.substeps == 5
            assert spec.episode_length == 1000
            assert spec.dof == 3 + spec.n_joints


class TestValidation:
    def test_joint_count_mismatch(self):
        spec = ModelSpec("bad", (LinkSpec(1, 1, 0.1), LinkSpec(1, 1, 0.1)), ())
        with pytest.raises(ValueError, match="joints"):
            spec.validate()

    def test_parent_must_precede_child(self):
        spec = ModelSpec(
            "bad",
            (LinkSpec(1, 1, 0.1), LinkSpec(1, 1, 0.1)),
            (JointSpec(1, -1.0, 1.0, 10.0),),
        )
        with pytest.raises(ValueError, match="parent"):
            spec.validate()

    def test_nonpositive_link(self):
        spec = ModelSpec("bad", (LinkSpec(0.0, 1, 0.1),), ())
        with pytest.raises(ValueError, match="non-positive"):
            spec.validate()

    def test_empty_limit_range(self):
        spec = ModelSpec(
            "bad",
            (LinkSpec(1, 1, 0.1), LinkSpec(1, 1, 0.1)),
            (JointSpec(0, 1.0, 1.0, 10.0),),
        )
        with pytest.raises(ValueError, match="limit"):
            spec.validate()

    def test_rest_qpos_length(self):
        spec = ModelSpec("bad", (LinkSpec(1, 1, 0.1),), (), rest_qpos=(0.0, 1.0))
        with pytest.raises(ValueError, match="rest_qpos"):
            spec.validate()


class TestModelFiles:
    def test_builtin_round_trip(self, tmp_path):
        for name in BUILTIN_MODELS:
            spec = builtin_model(name)
            path = tmp_path / f"{name}.model"
            save_model(spec, path)
            assert load_model(path) == spec

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text(
            "# single stick\n"
            "name = stick\n\n"
            "link = 1.0 2.0 0.05  # the only link\n"
        )
        spec = load_model(path)
        assert spec.name == "stick"
        assert spec.links == (LinkSpec(1.0, 2.0, 0.05),)

    def test_malformed_line_reports_lineno(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("name = x\nbogus line\n")
        with pytest.raises(ValueError, match=":2"):
            load_model(path)

    def test_invalid_spec_rejected_on_load(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("name = x\nlink = -1 1 0.1\n")
        with pytest.raises(ValueError):
            load_model(path)


@settings(deadline=None, max_examples=30)
@given(
    n_links=st.integers(1, 6),
    dt=st.floats(1e-4, 0.05),
    seed=st.integers(0, 10_000),
)
def test_random_spec_round_trip(n_links, dt, seed, tmp_path_factory):
    rng = np.random.default_rng(seed)
    links = tuple(
        LinkSpec(float(rng.uniform(0.1, 2)), float(rng.uniform(0.1, 5)), float(rng.uniform(0.01, 0.2)))
        for _ in range(n_links)
    )
    joints = tuple(
        JointSpec(
            int(rng.integers(0, i + 1)),
            float(rng.uniform(-3, 0)),
            float(rng.uniform(0.1, 3)),
            float(rng.uniform(1, 100)),
            float(rng.uniform(0, 1)),
        )
        for i in range(n_links - 1)
    )
    spec = ModelSpec("rand", links, joints, dt=dt)
    spec.validate()
    path = tmp_path_factory.mktemp("models") / "rand.model"
    save_model(spec, path)
    assert load_model(path) == spec
