"""Training runs, the width sweep, and single-image distribution reports."""
import csv
import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from boltzlens.nn import checkpoint
from boltzlens.nn.network import get_preset, init_params
from boltzlens.nn.training import (
    DEFAULT_BATCH_SIZE, DEFAULT_LR, error_rate, precision_dtype, sgd_epoch,
)
from boltzlens.problens import PriorSpec, default_bin_edges, layer_kl_report, mean_f1_kl, write_report_csv
from boltzlens.synthgen import SyntheticDataset, load_dataset, randomize_labels

log = logging.getLogger(__name__)

METRICS_COLUMNS = ["epoch", "trainError", "testError", "avgKlF1", "wallClockSec"]


@dataclass
class ExperimentConfig:
    preset: str = "cnn2"
    dataset_path: str | None = None
    epochs: int = 30
    batch_size: int = DEFAULT_BATCH_SIZE
    lr: float = DEFAULT_LR
    seed: int = 0
    label_mode: str = "real"
    kl_eval_every: int = 1
    kl_subsample: int | None = None
    bin_edges: tuple | None = None
    precision: str | None = None
    record_wall_clock: bool = True

    def __post_init__(self):
        get_preset(self.preset)
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.label_mode not in ("real", "random"):
            raise ValueError(f"label mode must be real or random, got {self.label_mode!r}")
        if self.kl_eval_every < 1:
            raise ValueError("kl_eval_every must be >= 1")

    def edges(self):
        return default_bin_edges() if self.bin_edges is None else np.asarray(self.bin_edges, float)


def _coerce(fld, text):
    text = text.strip()
    kind = str(fld.type)
    if text.lower() in ("none", ""):
        return None
    if "bool" in kind:
        return text.lower() in ("1", "true", "yes", "on")
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    if "tuple" in kind:
        return tuple(float(v) for v in text.split(","))
    return text


CONFIG_ALIASES = {"datasetPath": "dataset_path", "data": "dataset_path", "batchSize": "batch_size",
                  "batch": "batch_size", "labelMode": "label_mode", "labels": "label_mode",
                  "klEvalEvery": "kl_eval_every", "binEdges": "bin_edges"}


def read_config_file(path):
    """Parse ``key = value`` lines into ExperimentConfig field values ('#' starts a comment)."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = CONFIG_ALIASES.get(key, key)
            if key not in fields:
                raise ValueError(f"{path}:{n}: unknown config key {key!r}")
            out[key] = _coerce(fields[key], value)
    return out


@dataclass
class EpochMetrics:
    epoch: int
    train_error: float
    test_error: float
    avg_kl_f1: float | None
    wall_clock: float


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)

    def __getitem__(self, i):
        return self.rows[i]

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRICS_COLUMNS)
            for r in self.rows:
                kl = "" if r.avg_kl_f1 is None else repr(r.avg_kl_f1)
                w.writerow([r.epoch, repr(r.train_error), repr(r.test_error), kl,
                            f"{r.wall_clock:.3f}"])


@dataclass
class TrainingResult:
    config: ExperimentConfig
    metrics: MetricsLog
    network: object
    best_network: object
    best_test_error: float


def _load(cfg, dataset):
    if dataset is None:
        if cfg.dataset_path is None:
            raise ValueError("no dataset given")
        dataset = load_dataset(cfg.dataset_path)
    if cfg.label_mode == "random":
        dataset = randomize_labels(dataset, cfg.seed)
    return dataset


def evaluate(net, X, y):
    """Misclassification rate of ``argmax(probs)``."""
    return error_rate(net, X, y)


def run_training(cfg, dataset=None, out_dir=None, save_best=True, metrics_name="metrics.csv"):
    """Train ``cfg.preset`` with plain SGD, logging errors and mean F1 KL per epoch.

    Row 0 of the log is the untrained network. When ``out_dir`` is given the
    metrics CSV, ``final.blnz`` and (with ``save_best``) ``best.blnz`` are
    written there.
    """
    dataset = _load(cfg, dataset)
    dtype = precision_dtype(cfg.precision)
    Xtr, ytr = dataset.arrays("train", dtype)
    Xte, yte = dataset.arrays("test", dtype)
    spec = get_preset(cfg.preset)
    if Xtr.shape[1:] != spec.input_shape:
        raise ValueError(f"dataset images {Xtr.shape[1:]} do not fit preset input {spec.input_shape}")
    net = init_params(spec, cfg.seed, dtype)
    shuffle = np.random.default_rng([cfg.seed, 1])
    edges = cfg.edges()
    Xkl = Xte if cfg.kl_subsample is None else Xte[:cfg.kl_subsample]
    t0 = time.perf_counter()
    metrics = MetricsLog()

    def record(epoch):
        kl = None
        if epoch % cfg.kl_eval_every == 0 or epoch == cfg.epochs:
            kl = mean_f1_kl(net, Xkl, PriorSpec(), edges) if len(Xkl) else None
        wall = time.perf_counter() - t0 if cfg.record_wall_clock else 0.0
        row = EpochMetrics(epoch, evaluate(net, Xtr, ytr), evaluate(net, Xte, yte), kl, wall)
        metrics.rows.append(row)
        log.info("%s epoch %d train %.4f test %.4f kl %s", cfg.preset, epoch,
                 row.train_error, row.test_error, kl)
        return row

    best = record(0).test_error
    best_net = net.copy()
    for epoch in range(1, cfg.epochs + 1):
        sgd_epoch(net, Xtr, ytr, cfg.lr, cfg.batch_size, shuffle)
        row = record(epoch)
        if row.test_error < best:
            best, best_net = row.test_error, net.copy()

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        if metrics_name:
            metrics.write_csv(os.path.join(out_dir, metrics_name))
        checkpoint.save(net, os.path.join(out_dir, "final.blnz"))
        if save_best:
            checkpoint.save(best_net, os.path.join(out_dir, "best.blnz"))
    return TrainingResult(cfg, metrics, net, best_net, best)


@dataclass
class SweepResult:
    runs: dict  # preset -> TrainingResult

    def table(self):
        """Rows ``(preset, epoch, avgKlF1, trainError, testError)`` for epochs >= 1."""
        return [(name, r.epoch, r.avg_kl_f1, r.train_error, r.test_error)
                for name, res in self.runs.items() for r in res.metrics.rows if r.epoch >= 1]

    def final(self):
        return {name: (res.metrics[-1].avg_kl_f1, res.metrics[-1].test_error)
                for name, res in self.runs.items()}


def width_sweep(dataset_path=None, seed=0, epochs=30, out_dir=None, dataset=None,
                presets=("cnn1", "cnn2", "cnn3"), **cfg_kwargs):
    """Train each preset on the same data and seed.

    Writes ``kl_curves.csv`` and ``error_curves.csv`` plus ``<preset>.blnz``
    per preset when ``out_dir`` is given.
    """
    if dataset is None:
        dataset = load_dataset(dataset_path)
    runs = {}
    for name in presets:
        cfg = ExperimentConfig(preset=name, dataset_path=dataset_path, epochs=epochs, seed=seed,
                               **cfg_kwargs)
        runs[name] = run_training(cfg, dataset=dataset)
    result = SweepResult(runs)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        table = result.table()
        with open(os.path.join(out_dir, "kl_curves.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["preset", "epoch", "avgKlF1"])
            for name, epoch, kl, _, _ in table:
                w.writerow([name, epoch, "" if kl is None else repr(kl)])
        with open(os.path.join(out_dir, "error_curves.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["preset", "epoch", "trainError", "testError"])
            for name, epoch, _, tr, te in table:
                w.writerow([name, epoch, repr(tr), repr(te)])
        for name, res in runs.items():
            checkpoint.save(res.network, os.path.join(out_dir, f"{name}.blnz"))
    return result


def single_image_report(checkpoint_path, dataset, index, out_dir=None, bin_edges=None,
                        prior=PriorSpec()):
    """Distribution report for test image ``index`` under a saved network."""
    net = checkpoint.load(checkpoint_path)
    if not isinstance(dataset, SyntheticDataset):
        dataset = load_dataset(dataset)
    X, _ = dataset.arrays("test")
    if not 0 <= index < X.shape[0]:
        raise IndexError(f"test index {index} out of range for {X.shape[0]} images")
    report = layer_kl_report(net, X[index], prior, bin_edges)
    if out_dir is not None:
        write_report_csv(report, out_dir)
    return report
