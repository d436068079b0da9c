"""Command-line entry point: ``boltzlens <subcommand> ...``.

Exit codes: 0 success, 1 domain error, 2 I/O error, 64 usage error.
"""
import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass

from boltzlens.errors import BoltzlensError

EXIT_OK, EXIT_DOMAIN, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("boltzlens")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_at_least(lo):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
        if value < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {value}")
        return value
    return parse


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


@dataclass
class Command:
    name: str
    args: dict


# flags a config file may supply; checked after merging
_REQUIRED = {
    "train": ["preset", "data", "epochs", "seed", "out"],
    "sweep": ["data", "epochs", "seed", "out"],
    "random-label": ["data", "epochs", "seed", "out"],
}
_CONFIG_KEYS = {"preset": "preset", "dataset_path": "data", "epochs": "epochs", "seed": "seed",
                "lr": "lr", "batch_size": "batch", "label_mode": "labels"}


def build_parser():
    parser = _Parser(prog="boltzlens", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth-gen", help="generate a synthetic Gaussian digit dataset")
    p.add_argument("--source", nargs=2, metavar=("IMAGES", "LABELS"), required=True)
    p.add_argument("--per-class-train", type=_int_at_least(0), required=True)
    p.add_argument("--per-class-test", type=_int_at_least(0), required=True)
    p.add_argument("--seed", type=_int_at_least(0), required=True)
    p.add_argument("--out", required=True, help="output directory, or a .blds file path")
    p.add_argument("--threshold", type=int, default=127)
    p.add_argument("--shuffle-within", action="store_true")
    p.add_argument("--flip-polarity", action="store_true")

    p = sub.add_parser("corpus", help="write the bundled digit corpus as IDX files")
    p.add_argument("--out", required=True)

    def training_flags(p, preset_default=None):
        p.add_argument("--config")
        p.add_argument("--data")
        p.add_argument("--epochs", type=_int_at_least(1))
        p.add_argument("--seed", type=_int_at_least(0))
        p.add_argument("--lr", type=_positive_float)
        p.add_argument("--batch", type=_int_at_least(1))
        p.add_argument("--kl-every", type=_int_at_least(1))
        p.add_argument("--kl-subsample", type=_int_at_least(1))
        p.add_argument("--out")

    p = sub.add_parser("train", help="train one preset")
    training_flags(p)
    p.add_argument("--preset", choices=["cnn1", "cnn2", "cnn3"])
    p.add_argument("--labels", choices=["real", "random"])

    p = sub.add_parser("sweep", help="train cnn1, cnn2 and cnn3 on the same data")
    training_flags(p)

    p = sub.add_parser("random-label", help="train on uniformly random labels")
    training_flags(p)
    p.add_argument("--preset", choices=["cnn1", "cnn2", "cnn3"])

    p = sub.add_parser("report", help="per-layer distributions for one test image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=_int_at_least(0), required=True)
    p.add_argument("--out", required=True)

    sub.add_parser("verify", help="run the fast invariant checks")
    return parser


def parse_args(argv):
    """Validated :class:`Command`; raises :class:`UsageError` naming the bad flag."""
    ns = build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError("boltzlens: a subcommand is required")
    args = vars(ns)
    name = args.pop("command")
    config_path = args.pop("config", None)
    if config_path:
        from boltzlens.experiments import read_config_file
        try:
            cfg = read_config_file(config_path)
        except OSError as exc:
            raise UsageError(f"cannot read --config: {exc}") from exc
        except ValueError as exc:
            raise UsageError(f"--config: {exc}") from exc
        for key, flag in _CONFIG_KEYS.items():
            if key in cfg and args.get(flag) is None and flag in args:
                args[flag] = cfg[key]
        args["_config"] = cfg
    if name == "random-label":
        args["preset"] = args.get("preset") or "cnn3"
        args["labels"] = "random"
    for flag in _REQUIRED.get(name, []):
        if args.get(flag) is None:
            raise UsageError(f"boltzlens {name}: missing required flag --{flag}")
    if args.get("epochs") is not None and args["epochs"] < 1:
        raise UsageError(f"boltzlens {name}: --epochs must be >= 1")
    return Command(name, args)


def _experiment_config(a):
    from boltzlens.experiments import ExperimentConfig
    extra = {k: v for k, v in a.get("_config", {}).items()
             if k not in _CONFIG_KEYS and k in {f.name for f in dataclasses.fields(ExperimentConfig)}}
    kw = dict(extra, preset=a.get("preset") or "cnn2", dataset_path=a["data"], epochs=a["epochs"],
              seed=a["seed"], label_mode=a.get("labels") or "real")
    if a.get("lr") is not None:
        kw["lr"] = a["lr"]
    if a.get("batch") is not None:
        kw["batch_size"] = a["batch"]
    if a.get("kl_every") is not None:
        kw["kl_eval_every"] = a["kl_every"]
    if a.get("kl_subsample") is not None:
        kw["kl_subsample"] = a["kl_subsample"]
    return ExperimentConfig(**kw)


def _synth_gen(a):
    from boltzlens.synthgen import generate_dataset, load_idx, save_dataset
    sources = load_idx(*a["source"])
    ds = generate_dataset(sources, a["per_class_train"], a["per_class_test"], a["seed"],
                          threshold=a["threshold"], shuffle_within=a["shuffle_within"],
                          flip_polarity=a["flip_polarity"])
    out = a["out"]
    if not out.endswith(".blds"):
        os.makedirs(out, exist_ok=True)
        out = os.path.join(out, "dataset.blds")
    else:
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    save_dataset(ds, out, sources=a["source"])
    print(f"wrote {len(ds)} samples to {out}")


def _corpus(a):
    from boltzlens.synthgen.corpus import write_digits_idx
    os.makedirs(a["out"], exist_ok=True)
    imgs = os.path.join(a["out"], "digits-images-idx3-ubyte")
    lbls = os.path.join(a["out"], "digits-labels-idx1-ubyte")
    n = write_digits_idx(imgs, lbls)
    print(f"wrote {n} images to {imgs} and {lbls}")


def _train(a):
    from boltzlens.experiments import run_training
    cfg = _experiment_config(a)
    res = run_training(cfg, out_dir=a["out"])
    last = res.metrics[-1]
    print(f"{cfg.preset}: epoch {last.epoch} train error {last.train_error:.4f} "
          f"test error {last.test_error:.4f} avgKlF1 {last.avg_kl_f1}")


def _sweep(a):
    from boltzlens.experiments import width_sweep
    cfg = _experiment_config(a)
    kw = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)
          if f.name not in ("preset", "dataset_path", "epochs", "seed", "label_mode")}
    res = width_sweep(cfg.dataset_path, cfg.seed, cfg.epochs, out_dir=a["out"], **kw)
    for name, (kl, err) in res.final().items():
        print(f"{name}: avgKlF1 {kl:.4f} test error {err:.4f}")


def _report(a):
    from boltzlens.experiments import single_image_report
    rep = single_image_report(a["checkpoint"], a["data"], a["index"], out_dir=a["out"])
    for name, kl in rep.kls().items():
        print(f"KL[P(X)||P({name})] = {kl:.4f}")


def _verify(a):
    from boltzlens.verify import run_all
    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_DOMAIN


HANDLERS = {"synth-gen": _synth_gen, "corpus": _corpus, "train": _train, "sweep": _sweep,
            "random-label": _train, "report": _report, "verify": _verify}


def dispatch(cmd):
    try:
        code = HANDLERS[cmd.name](cmd.args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BoltzlensError, ValueError, IndexError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK if code is None else code


def main(argv=None):
    logging.basicConfig(level=os.environ.get("BOLTZLENS_LOG", "WARNING"),
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cmd = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    return dispatch(cmd)


def synth_gen_main(argv=None):
    return main(["synth-gen", *(sys.argv[1:] if argv is None else argv)])


if __name__ == "__main__":
    sys.exit(main())
