import numpy as np
import pytest

from boltzlens.experiments import (
    ExperimentConfig, evaluate, read_config_file, run_training, single_image_report, width_sweep,
)
from boltzlens.nn import checkpoint
from boltzlens.nn.network import PRESETS, init_params, zeros_like_network
from boltzlens.synthgen import generate_dataset, save_dataset


@pytest.fixture(scope="module")
def small(corpus):
    return generate_dataset(corpus, 6, 3, 11)


def test_evaluate_perfect_and_constant(rng):
    net = zeros_like_network(PRESETS["cnn1"])
    net.params[-1].bias[3] = 1.0  # always predicts 3
    X = rng.normal(size=(40, 32, 32, 1))
    y = np.tile(np.arange(10), 4)
    assert evaluate(net, X, y) == pytest.approx(0.9)
    assert evaluate(net, X, np.full(40, 3)) == 0.0


def test_evaluate_matches_loop(rng):
    from boltzlens.nn.network import forward
    net = init_params(PRESETS["cnn1"], 0)
    X = 32 * rng.normal(size=(30, 32, 32, 1))
    y = rng.integers(0, 10, 30)
    wrong = sum(int(np.argmax(forward(net, x)) != t) for x, t in zip(X, y))
    assert evaluate(net, X, y) == wrong / 30


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(epochs=0)
    with pytest.raises(ValueError):
        ExperimentConfig(lr=0)
    with pytest.raises(ValueError):
        ExperimentConfig(label_mode="shuffled")
    with pytest.raises(ValueError, match="cnn9"):
        ExperimentConfig(preset="cnn9")


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# desk run\npreset = cnn3\nepochs = 5\nlr = 0.005\nbatchSize = 16\n"
                 "record_wall_clock = false\n")
    cfg = read_config_file(p)
    assert cfg == {"preset": "cnn3", "epochs": 5, "lr": 0.005, "batch_size": 16,
                   "record_wall_clock": False}
    p.write_text("bogus = 1\n")
    with pytest.raises(ValueError, match="bogus"):
        read_config_file(p)


def test_run_training_outputs(small, tmp_path):
    cfg = ExperimentConfig(preset="cnn1", epochs=2, seed=3)
    res = run_training(cfg, dataset=small, out_dir=tmp_path)
    assert [r.epoch for r in res.metrics] == [0, 1, 2]
    assert all(r.avg_kl_f1 >= 0 for r in res.metrics)
    header = (tmp_path / "metrics.csv").read_text().splitlines()[0]
    assert header == "epoch,trainError,testError,avgKlF1,wallClockSec"
    net = checkpoint.load(tmp_path / "final.blnz")
    for a, b in zip(net.arrays(), res.network.arrays()):
        np.testing.assert_array_equal(a, b)
    assert (tmp_path / "best.blnz").exists()


def test_run_training_deterministic(small):
    cfg = ExperimentConfig(preset="cnn1", epochs=1, seed=4, record_wall_clock=False)
    a, b = run_training(cfg, dataset=small), run_training(cfg, dataset=small)
    assert a.metrics.rows == b.metrics.rows


def test_kl_eval_every(small):
    res = run_training(ExperimentConfig(preset="cnn1", epochs=3, kl_eval_every=2), dataset=small)
    assert [r.avg_kl_f1 is None for r in res.metrics] == [False, True, False, False]


def test_random_labels_change_targets(small):
    res = run_training(ExperimentConfig(preset="cnn1", epochs=1, label_mode="random"), dataset=small)
    assert len(res.metrics) == 2


def test_sweep(small, tmp_path):
    res = width_sweep(seed=0, epochs=2, out_dir=tmp_path, dataset=small)
    table = res.table()
    assert len(table) == 3 * 2
    assert {row[0] for row in table} == {"cnn1", "cnn2", "cnn3"}
    kl = (tmp_path / "kl_curves.csv").read_text().splitlines()
    err = (tmp_path / "error_curves.csv").read_text().splitlines()
    assert kl[0] == "preset,epoch,avgKlF1" and len(kl) == 7
    assert err[0] == "preset,epoch,trainError,testError" and len(err) == 7
    for name in ("cnn1", "cnn2", "cnn3"):
        assert (tmp_path / f"{name}.blnz").exists()


def test_single_image_report(small, tmp_path):
    ckpt = tmp_path / "n.blnz"
    checkpoint.save(init_params(PRESETS["cnn2"], 0), ckpt)
    data = tmp_path / "d.blds"
    save_dataset(small, data)
    rep = single_image_report(ckpt, str(data), 0, out_dir=tmp_path / "rep")
    assert set(rep.kls()) == {"input", "F1"}
    assert (tmp_path / "rep" / "report.csv").exists()
    with pytest.raises(IndexError):
        single_image_report(ckpt, small, 10_000)
