import json

import numpy as np
import pytest

hgot = pytest.importorskip("hgot")


def test_version():
    assert hgot.__version__ == "0.1.0"


def test_sinkhorn_matches_exact_oracle():
    rng = np.random.default_rng(0)
    cost = rng.uniform(size=(4, 4))
    cost /= cost.max()
    sk = hgot.sinkhorn(cost, epsilon=1e-3)
    exact = hgot.exact_ot(cost)
    assert sk["converged"]
    assert sk["residual"] <= 1e-6
    assert sk["objective"] == pytest.approx(exact["objective"], rel=0.01)
    np.testing.assert_allclose(sk["plan"].sum(axis=1), np.full(4, 0.25), atol=1e-6)
    np.testing.assert_allclose(sk["plan"].sum(axis=0), np.full(4, 0.25), atol=1e-6)


def test_sinkhorn_custom_marginals():
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    mu = np.array([0.7, 0.3])
    nu = np.array([0.2, 0.8])
    out = hgot.sinkhorn(cost, mu, nu, epsilon=0.05)
    np.testing.assert_allclose(out["plan"].sum(axis=1), mu, atol=1e-6)
    np.testing.assert_allclose(out["plan"].sum(axis=0), nu, atol=1e-6)
    with pytest.raises(hgot.ConfigError):
        hgot.sinkhorn(cost, mu)  # one marginal without the other


def test_fgw_identity_pair():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(6, 3))
    A = np.eye(6)
    out = hgot.fgw(H, H, A, A, sigma=0.5)
    assert out["converged"]
    assert out["distance"] >= 0.0
    assert out["plan"].shape == (6, 6)
    objs = out["objectives"]
    assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))


def test_probe_and_clustering_on_blobs():
    rng = np.random.default_rng(2)
    centers = np.array([[-6.0, -6.0], [6.0, 0.0], [0.0, 6.0]])
    labels = np.repeat(np.arange(3), 30)
    Z = centers[labels] + 0.2 * rng.normal(size=(90, 2))
    probe = hgot.linear_probe(Z, labels.tolist())
    assert probe["macro_f1"] == 1.0
    assignment = hgot.hierarchical_cluster(Z, 3)
    scores = hgot.clustering_metrics(assignment, labels.tolist())
    assert scores["acc"] == 1.0
    assert scores["nmi"] == 1.0
    assert scores["ari"] == 1.0
    summary = hgot.probe_over_seeds(Z, labels.tolist(), n_seeds=3)
    assert summary["macro_f1"]["mean"] == 1.0
    assert len(summary["macro_f1"]["values"]) == 3


def tiny_config(out_dir):
    return {
        "version": 1,
        "data": {
            "synthetic": {
                "n_target": 12,
                "n_bridge_per_relation": 3,
                "feature_dim": 4,
                "feature_noise": 0.5,
                "seed": 7,
            }
        },
        "encoder": {"d": 4, "heads": 2, "d_m": 3, "depth": 1},
        "solver": {"epsilon": 0.1, "unroll_iters": 10},
        "train": {"epochs": 2, "learning_rate": 1e-2},
        "probe": {"probe_epochs": 50, "seeds": 2},
        "output": str(out_dir),
    }


def test_train_eval_pipeline(tmp_path):
    cfg = tiny_config(tmp_path / "run")
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    hgot.train(cfg_path)
    for name in ("loss.csv", "checkpoint.json", "embeddings.csv", "metrics.json"):
        assert (tmp_path / "run" / name).exists()
    metrics = json.loads((tmp_path / "run" / "metrics.json").read_text())
    assert metrics["labeled"] is True
    assert metrics["epochs_run"] == 2

    eval_cfg = dict(cfg)
    eval_cfg["checkpoint"] = str(tmp_path / "run" / "checkpoint.json")
    eval_cfg["output"] = str(tmp_path / "scored")
    eval_path = tmp_path / "eval.json"
    eval_path.write_text(json.dumps(eval_cfg))
    hgot.evaluate(eval_path)
    scored = json.loads((tmp_path / "scored" / "metrics.json").read_text())
    assert scored["probe"]["macro_f1"]["values"] == metrics["probe"]["macro_f1"]["values"]


def test_config_errors_surface(tmp_path):
    cfg = tiny_config(tmp_path / "run")
    cfg["mystery"] = 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cfg))
    with pytest.raises(hgot.ConfigError, match="unknown key"):
        hgot.train(bad)
    with pytest.raises(hgot.DataError):
        hgot.train(tmp_path / "missing.json")


def test_generate_dataset_labels(tmp_path):
    labels = hgot.generate_dataset(tmp_path / "ds", n_target=15, seed=3)
    assert len(labels) == 15
    assert set(labels) == {0, 1, 2}
    assert (tmp_path / "ds").is_dir()


def test_bench_rows():
    out = hgot.bench(sizes=[6, 9], seed=1, repeats=1)
    assert {r["solver"] for r in out["rows"]} == {"sinkhorn", "cg"}
    assert len(out["rows"]) == 4
    assert all(r["per_iter_seconds"] > 0 for r in out["rows"])
