"""Command-line entry points: autoencoder pretraining, policy training,
evaluation and the teleop service.

Exit codes: 0 on success, 1 for usage errors, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .policy import PolicyConfig, TrajectoryPolicy, pretrain_cae, save_cae
from .sim import RandomizationSpec
from .train import TrainConfig, evaluate_policy, train, write_report

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def load_config_overrides(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_pretrain_cae(args) -> int:
    overrides = load_config_overrides(args.config)
    spec = (RandomizationSpec.from_dict(overrides["scene"])
            if "scene" in overrides else None)
    encoder, decoder, report = pretrain_cae(
        num_images=args.num_images, seed=args.seed,
        epochs=overrides.get("epochs", 8),
        batch_size=overrides.get("batch_size", 64),
        lr=overrides.get("lr", 1e-3), spec=spec)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "cae.ckpt")
    save_cae(ckpt, encoder, decoder, report)
    report_path = os.path.join(args.out, "cae_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    print(f"wrote {ckpt} (final loss {report.final_loss:.6f}, "
          f"{report.num_images} images)")
    return 0


def cmd_train(args) -> int:
    overrides = load_config_overrides(args.config)
    config = TrainConfig.from_dict({
        **overrides,
        "iterations": args.iterations,
        "rollouts_per_iteration": args.rollouts,
        "workers": args.workers,
        "seed": args.seed,
        "out_dir": args.out,
    })
    result = train(config, cae_path=args.cae, resume_path=args.resume,
                   log=lambda msg: print(msg, file=sys.stderr))
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    print(f"checkpoint: {result.checkpoint_path}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    policy, _, _ = TrajectoryPolicy.load(args.checkpoint)
    overrides = load_config_overrides(args.config)
    spec = (RandomizationSpec.from_dict(overrides["scene"])
            if "scene" in overrides else None)
    report = evaluate_policy(policy, num_scenes=args.scenes, k=args.k,
                             seed=args.seed, scene_spec=spec)
    summary = {k: v for k, v in report.items() if k != "scenes"}
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        write_report(report, args.out)
        print(f"report: {args.out}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    policy = None
    if args.checkpoint:
        if not os.path.exists(args.checkpoint):
            raise FileNotFoundError(f"policy checkpoint not found: {args.checkpoint}")
        policy, _, _ = TrajectoryPolicy.load(args.checkpoint)
    app = create_app(policy=policy, data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="pushgrasp",
                       description="push-to-grasp teleoperation workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain-cae", help="pretrain the depth autoencoder")
    p.add_argument("--num-images", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/cae")
    p.add_argument("--config", default=None, help="JSON overrides")
    p.set_defaults(func=cmd_pretrain_cae)

    p = sub.add_parser("train", help="train the rearranging policy")
    p.add_argument("--cae", required=True, help="autoencoder checkpoint")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--rollouts", type=int, default=32)
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="runs/train")
    p.add_argument("--resume", default=None, help="policy checkpoint to continue")
    p.add_argument("--config", default=None, help="JSON overrides")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained policy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenes", type=int, default=100)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--out", default=None, help="write full JSON report here")
    p.add_argument("--config", default=None, help="JSON overrides")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the teleop session service")
    p.add_argument("--checkpoint", default=None, help="policy checkpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--data-dir", default=None,
                   help="episode log directory (default: $PUSHGRASP_DATA_DIR)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    if getattr(args, "data_dir", "unset") is None:
        args.data_dir = os.environ.get("PUSHGRASP_DATA_DIR")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return RUNTIME_ERROR
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
