"""Command line entry point: ``varmia <subcommand>`` or ``python -m varmia``.

Exit codes: 0 success, 2 configuration error, 3 runtime phase error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, default_output_dir

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON ExperimentConfig; overrides the flags below")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", choices=["shapes", "gmm"], default="shapes")
    p.add_argument("--n-samples", type=int, default=400)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--nonmembers", choices=["holdout", "style_shift"], default="holdout")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.02)
    p.add_argument("--steps", type=int, default=20_000, help="max training steps")
    p.add_argument("--hidden", default="256,256,256")
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--method", choices=["rediffuse", "rediffuse_plus", "loss_baseline"],
                   default="rediffuse")
    p.add_argument("--n", type=int, default=10, help="variations averaged per sample")
    p.add_argument("--t", type=int, default=None,
                   help="diffusion step (default T/5, or T/100 with --latent)")
    p.add_argument("--k", type=int, default=None, help="sampling interval (default t/2)")
    p.add_argument("--distance", choices=["lp", "ssim", "learned"], default="lp")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--latent", action="store_true")
    p.add_argument("--target-fpr", type=float, default=0.01)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="output directory")


def config_from_args(args) -> ExperimentConfig:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from None
        cfg = ExperimentConfig.from_json(text)
        if args.out:
            cfg.output_dir = args.out
        return cfg
    d = {
        "seed": args.seed,
        "dataset": {"kind": args.dataset, "n": args.n_samples, "side": args.side,
                    "nonmembers": args.nonmembers},
        "schedule": {"T": args.T, "beta_start": args.beta_start, "beta_end": args.beta_end},
        "training": {"hidden": [int(h) for h in args.hidden.split(",")], "lr": args.lr,
                     "max_steps": args.steps, "epochs": 10_000, "cosine_decay": True},
        "attack": {"method": args.method, "n": args.n, "t": args.t, "k": args.k,
                   "distance": args.distance, "p": args.p, "latent": args.latent},
        "eval": {"target_fpr": args.target_fpr, "tau": args.tau},
        "output_dir": args.out or default_output_dir(),
        "workers": args.workers,
    }
    return ExperimentConfig.from_dict(d)


def cmd_gen_data(args) -> int:
    from .data import gen_gmm_dataset, gen_shape_dataset, save_dataset, split_members, style_shift
    if args.kind == "shapes":
        ds = gen_shape_dataset(args.n_samples, args.side, args.seed)
    else:
        ds = gen_gmm_dataset(args.n_samples, args.d, args.K, args.seed)
    save_dataset(ds, args.out, split_members(ds, args.seed))
    if args.style_shift:
        save_dataset(style_shift(ds, args.seed + 1), Path(args.out) / "style_shifted")
    print(f"wrote {len(ds)} samples to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .harness import prepare
    cfg = config_from_args(args)
    lab = prepare(cfg, Path(cfg.output_dir) / "model")
    print(f"model saved to {lab.model_dir} ({lab.model.parameter_count} parameters)")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import serve_variation_api
    serve_variation_api(args.model, None, args.bind, args.default_k, args.default_t,
                        args.codec)
    return EXIT_OK


def cmd_attack(args) -> int:
    from .harness import load_lab, run_experiment
    cfg = config_from_args(args)
    if args.url:
        from .attack import make_distance, score_samples
        from .harness import build_dataset, evaluation_set, scores_to_csv
        from .data import split_members
        from .variation import RemoteEndpoint
        ds = build_dataset(cfg)
        samples, ids, flags = evaluation_set(cfg, ds, split_members(ds, cfg.seed))
        recs = score_samples(samples, ids, flags, method=cfg.attack.method,
                             t=cfg.attack_t(), n=cfg.attack.n, k=cfg.attack_k(),
                             distance=make_distance(cfg.attack.distance, cfg.attack.p),
                             endpoint=RemoteEndpoint(args.url),
                             experiment_seed=cfg.seed, workers=cfg.workers)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "scores.csv").write_text(scores_to_csv(recs))
        print(f"wrote {out / 'scores.csv'}")
        return EXIT_OK
    lab = load_lab(cfg, args.model) if args.model else None
    manifest = run_experiment(cfg, lab)
    print(json.dumps(manifest.metrics))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .harness import read_scores_csv
    from .metrics import summarize
    summary = summarize(read_scores_csv(args.scores), args.target_fpr, args.tau)
    text = summary.to_json()
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out).with_suffix(".csv").write_text(summary.points_csv())
    print(json.dumps({"auc": summary.auc, "asr": summary.asr,
                      "tpr_at_fpr": summary.tpr_at_1pct_fpr}))
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .harness import run_ablation
    cfg = config_from_args(args)
    values = [int(v) for v in args.values.split(",")]
    manifests = run_ablation(cfg, args.axis, values)
    for v, m in zip(values, manifests):
        print(f"{args.axis}={v} auc={m.metrics['auc']:.4f}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .metrics import RocSummary
    from .plotting import plot_roc_svg
    names = args.names.split(",") if args.names else [Path(m).stem for m in args.metrics]
    if len(names) != len(args.metrics):
        raise ConfigError("--names must match the number of metrics files")
    summaries = [(n, RocSummary.from_json(Path(m).read_text()))
                 for n, m in zip(names, args.metrics)]
    plot_roc_svg(summaries, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .harness import run_experiment
    manifest = run_experiment(config_from_args(args))
    print(json.dumps(manifest.metrics))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varmia", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate and save a toy dataset")
    p.add_argument("--kind", choices=["shapes", "gmm"], default="shapes")
    p.add_argument("--n-samples", type=int, default=400)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--style-shift", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    for name, func, hlp in (("train", cmd_train, "train a target denoiser"),
                            ("attack", cmd_attack, "score samples and evaluate"),
                            ("run", cmd_run, "full pipeline from one config")):
        p = sub.add_parser(name, help=hlp)
        _add_experiment_flags(p)
        if name == "attack":
            p.add_argument("--model", help="reuse a saved checkpoint directory")
            p.add_argument("--url", help="score through a remote variation API")
        p.set_defaults(func=func)

    p = sub.add_parser("serve", help="serve a checkpoint as a variation API")
    p.add_argument("--model", required=True)
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--default-k", type=int, default=None)
    p.add_argument("--default-t", type=int, default=None)
    p.add_argument("--codec", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval", help="metrics from a scores.csv")
    p.add_argument("--scores", required=True)
    p.add_argument("--target-fpr", type=float, default=0.01)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep one attack parameter")
    _add_experiment_flags(p)
    p.add_argument("--axis", choices=["n", "t", "k", "p"], required=True)
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", help="ROC SVG from metrics.json files")
    p.add_argument("metrics", nargs="+")
    p.add_argument("--names", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    from .harness import PhaseError
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhaseError, OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
