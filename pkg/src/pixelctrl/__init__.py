"""Batched continuous-control environments with pixel observations.

Simulation, software rendering, and distractor compositing run fused in a
single process, every stochastic event keyed by an explicit splittable
PRNG, so full rollouts are bit-reproducible from a seed.
"""

from .bench import (
    BenchConfig,
    BenchRecord,
    ConvStub,
    conv_stub_forward,
    read_csv,
    run_benchmark,
    write_csv,
)
from .distractor import (
    DistractorState,
    advance_distractors,
    apply_color,
    apply_video,
    init_distractors,
)
from .env import (
    Env,
    EnvConfig,
    EnvState,
    StepOutput,
    load_env_config,
    make_env,
    observe,
    save_env_config,
    step,
)
from .models import ModelSpec, builtin_model, load_model, save_model
from .physics import (
    SystemState,
    check_termination,
    compute_reward,
    forward_kinematics,
    reset_state,
    step_dynamics,
)
from .prng import Key, fold_in, key_from_seed, normal, random_index, split, uniform
from .recorder import (
    TrajectoryDigest,
    load_digest,
    make_policy,
    read_png,
    record_rollout,
    save_digest,
    verify_digest,
    write_png,
)
from .render import (
    Camera,
    CameraConfig,
    Frame,
    Mesh,
    Pose,
    render,
    render_batch,
    tessellate_capsule,
    tessellate_sphere,
    track_camera,
)
from .video_pack import PackFormatError, VideoPack, load_video_pack, save_video_pack
from .video_tools import generate_synthetic_pack, pack_from_frames

__version__ = "0.1.0"
