import os
import subprocess

import numpy as np
import pytest

import tembed


def unit_rows(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_triplet_loss_matches_closed_form():
    rng = np.random.default_rng(0)
    a, p, n = unit_rows(rng, 3, 5)
    alpha = 1.5
    expected = max(0.0, np.sum((a - p) ** 2) - np.sum((a - n) ** 2) + alpha)
    assert tembed.triplet_loss(a, p, n, alpha) == pytest.approx(expected, abs=1e-12)
    ga, gp, gn = tembed.triplet_grads(a, p, n, alpha)
    if expected > 0:
        np.testing.assert_allclose(ga, 2 * (n - p), atol=1e-12)
        np.testing.assert_allclose(gp, -2 * (a - p), atol=1e-12)
        np.testing.assert_allclose(gn, 2 * (a - n), atol=1e-12)


def test_margin_schedule():
    assert tembed.margin_at("0:1.0,20:1.3,30:1.5", 19) == 1.0
    assert tembed.margin_at("0:1.0,20:1.3,30:1.5", 20) == 1.3
    assert tembed.margin_at("0:1.0,20:1.3,30:1.5", 39) == 1.5


def test_ball_tree_matches_brute_force():
    rng = np.random.default_rng(1)
    points = unit_rows(rng, 400, 16)
    tree = tembed.BallTree(points)
    assert len(tree) == 400
    for q in unit_rows(rng, 20, 16):
        idx, dist = tree.query(q, 5)
        assert (idx, dist) == tembed.brute_force(points, q, 5)
        ref = np.argsort(np.linalg.norm(points - q, axis=1), kind="stable")[:5]
        assert list(ref) == idx


def test_half_split_on_separated_clusters():
    rng = np.random.default_rng(2)
    centers = np.eye(3)
    x = np.repeat(centers, 100, axis=0) + 0.05 * rng.normal(size=(300, 3))
    labels = [i // 100 for i in range(300)]
    for mode in ("centroid", "knn"):
        r = tembed.half_split_evaluate(x, labels, ["a", "b", "c"], mode=mode, k=10, seed=3)
        assert len(r["reference"]) == 150
        assert r["confusion"].sum(axis=1).tolist() == [50, 50, 50]
        assert r["macro_f1"] == 1.0
    with pytest.raises(ValueError):
        tembed.half_split_evaluate(x, labels, ["a", "b", "c"], mode="svm")


def test_train_embed_and_checkpoint(tmp_path):
    data = tembed.generate_synthetic(3, 20, 16, seed=4)
    splits = tembed.make_splits(data, val=4, test=6, min_abundance=10, seed=4)
    assert splits.seen_names == data.class_names
    inputs = data.inputs(16)
    seen = []
    net, history = tembed.train(inputs, splits, dim=8, iterations=2, batches_per_iteration=3,
                                on_iteration=lambda rec: seen.append(rec.iteration))
    assert seen == [1, 2]
    assert [h.iteration for h in history] == [1, 2]
    emb = net.embed(inputs)
    np.testing.assert_allclose(np.linalg.norm(emb, axis=1), 1.0, atol=1e-9)

    again, _ = tembed.train(inputs, splits, dim=8, iterations=2, batches_per_iteration=3)
    assert again == net

    path = tmp_path / "model.bin"
    net.save(path)
    loaded = tembed.Network.load(path)
    assert loaded == net
    assert loaded.checksum() == net.checksum()
    np.testing.assert_array_equal(loaded.embed(inputs), emb)

    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(tembed.ParseError):
        tembed.Network.load(path)


def test_evaluate_unseen_requires_unseen_classes():
    data = tembed.generate_synthetic(3, 12, 16, seed=5)
    splits = tembed.make_splits(data, val=2, test=2, min_abundance=5, seed=5)
    net = tembed.Network(16, 8, seed=1)
    with pytest.raises(tembed.ProtocolError):
        tembed.evaluate_unseen(net, data.inputs(16), splits)


def test_export_projector(tmp_path):
    rng = np.random.default_rng(6)
    vectors = unit_rows(rng, 12, 4)
    labels = [f"class {i % 3}" for i in range(12)]
    tembed.export_projector(vectors, labels, tmp_path / "proj")
    back = np.loadtxt(tmp_path / "proj" / "vectors.tsv", delimiter="\t")
    np.testing.assert_allclose(back, vectors, atol=1e-9)
    assert (tmp_path / "proj" / "metadata.tsv").read_text().splitlines() == labels


def test_cli_in_process(tmp_path):
    status, _, err = tembed.cli(["synth", "--classes", "2", "--per-class", "4", "--side", "16",
                                 "--out", str(tmp_path / "data")])
    assert status == 0, err
    data = tembed.load_dataset_dir(tmp_path / "data")
    assert len(data) == 8
    assert tembed.cli(["frobnicate"])[0] == 2


@pytest.mark.skipif("TEMBED_CLI" not in os.environ, reason="CLI binary path not provided")
def test_cli_binary_help():
    out = subprocess.run([os.environ["TEMBED_CLI"], "train", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "--margins" in out.stdout
