"""Command-line entry point.

Subcommands:
    bench   throughput measurement over batch sizes, CSV output
    record  roll out a policy and write a trajectory digest (+ PNG dumps)
    verify  re-run a recorded rollout and report the first divergence
    pack    build a video pack from directories of PPM frames
    synth   generate a synthetic video pack
    serve   line-oriented env protocol on stdin/stdout (for bindings)
"""

from __future__ import annotations

import argparse
import sys

from .bench import BenchConfig, run_benchmark, write_csv
from .env import EnvConfig, load_env_config
from .prng import key_from_seed
from .recorder import load_digest, record_rollout, save_digest, verify_digest
from .threading_utils import max_threads
from .video_tools import generate_synthetic_pack, pack_from_frames

__all__ = ["main"]


def _parse_res(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"resolution must look like 84x84, got {text!r}")


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like HxW, got {text!r}")


def _env_config_from_args(args) -> EnvConfig:
    overrides = {}
    if args.threads:
        overrides["threads"] = args.threads
    return load_env_config(args.config, **overrides)


def _cmd_bench(args) -> int:
    width, height = args.res
    config = BenchConfig(
        env_names=tuple(args.envs.split(",")),
        batches=tuple(int(b) for b in args.batches.split(",")),
        distractor_modes=(args.distractor,),
        video_pack_path=args.pack,
        warmup_steps=args.warmup,
        measure_steps=args.steps,
        width=width,
        height=height,
        seed=args.seed,
        threads=args.threads or max_threads(),
    )

    def progress(rec):
        print(
            f"{rec.env_name} batch={rec.batch} {rec.distractor_mode}: "
            f"{rec.steps_per_second:.6g} sps ({rec.wall_seconds:.2f}s, "
            f"digest {rec.digest[:16]})"
        )

    records = run_benchmark(config, progress=progress)
    write_csv(records, args.out)
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def _cmd_record(args) -> int:
    config = _env_config_from_args(args)
    digest = record_rollout(
        config, args.policy, args.steps,
        dump_every=args.dump_every, dump_dir=args.dump_dir,
    )
    save_digest(digest, args.digest)
    print(f"{args.steps} steps, final hash {digest.final[:16]}, wrote {args.digest}")
    return 0


def _cmd_verify(args) -> int:
    digest = load_digest(args.digest)
    config = _env_config_from_args(args)
    result = verify_digest(digest, config)
    if result.ok:
        print(f"ok: {digest.steps} steps match ({digest.final[:16]})")
        return 0
    print(f"MISMATCH at step {result.first_divergence}")
    return 1


def _cmd_pack(args) -> int:
    height, width = args.size
    summary = pack_from_frames(args.in_dir, args.out, height, width)
    print(
        f"{summary.videos} videos, {summary.total_frames} frames, "
        f"{summary.bytes} bytes -> {args.out}"
    )
    return 0


def _cmd_synth(args) -> int:
    height, width = args.size
    summary = generate_synthetic_pack(
        key_from_seed(args.seed), args.videos, args.frames, height, width, args.out
    )
    print(
        f"{summary.videos} videos, {summary.total_frames} frames, "
        f"{summary.bytes} bytes -> {args.out}"
    )
    return 0


def _cmd_serve(args) -> int:
    from .serve import serve_stdio

    return serve_stdio()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixelctrl",
        description="Batched pixel-observation control environments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="measure steps/second over batch sizes")
    p.add_argument("--envs", default="cheetah_lite,walker_lite,hopper_lite")
    p.add_argument("--batches", default="1,10,100,1000")
    p.add_argument("--distractor", default="none", choices=("none", "color", "video"))
    p.add_argument("--pack", default=None, help="video pack (video mode only)")
    p.add_argument("--steps", type=int, default=500, help="timed steps per point")
    p.add_argument("--warmup", type=int, default=50, help="untimed warmup steps")
    p.add_argument("--res", type=_parse_res, default=(84, 84), metavar="WxH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=0, help="0 = all cores")
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("record", help="roll out a policy and write a digest")
    p.add_argument("--config", required=True, help="env config file")
    p.add_argument("--policy", default="zeros", help="zeros | random:<seed> | conv:<seed>")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--digest", required=True, help="digest output path")
    p.add_argument("--dump-every", type=int, default=0, help="PNG dump period (0 = off)")
    p.add_argument("--dump-dir", default=None)
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=_cmd_record)

    p = sub.add_parser("verify", help="re-run a digest and report divergence")
    p.add_argument("--digest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("pack", help="build a video pack from PPM frame directories")
    p.add_argument("--in", dest="in_dir", required=True, help="root of per-video subdirs")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=_parse_size, default=(64, 64), metavar="HxW")
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("synth", help="generate a synthetic video pack")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--videos", type=int, default=4)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--size", type=_parse_size, default=(64, 64), metavar="HxW")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("serve", help="env protocol over stdin/stdout")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
