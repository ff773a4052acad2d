import math

import numpy as np
import pytest

import larp

SMALL = dict(
    n_genres=3,
    tracks_per_genre=20,
    playlists=12,
    tracks_per_playlist=5,
    validation_tracks_per_genre=6,
    validation_playlists=6,
    test_tracks_per_genre=8,
    test_playlists=6,
    audio_dim=6,
    text_dim=5,
)


@pytest.fixture(scope="module")
def corpus():
    return larp.generate_synthetic(**SMALL)


def test_corpus_shapes(corpus):
    assert corpus.audio_dim == 6
    assert len(corpus.train) == 60
    assert len(corpus.test) == 24
    assert not set(corpus.train.track_ids) & set(corpus.test.track_ids)
    pl = corpus.test.playlists[0]
    assert len(pl.track_ids) == 5
    assert corpus.test.audio(pl.track_ids[0]).shape == (6,)


def test_metrics_hand_values():
    assert larp.recall_at_k(["a", "x", "c"], {"a", "b", "c"}, 3) == pytest.approx(2 / 3)
    assert larp.ndcg_at_k(["x", "b", "c"], {"b", "c"}, 3) == pytest.approx(0.6934, abs=1e-3)
    with pytest.raises(larp.DomainError):
        larp.recall_at_k(["a"], {"a"}, 0)


def test_contrast_orthogonal_pair():
    loss, ga, gt = larp.contrast(np.eye(2), np.eye(2), 1.0)
    assert loss == pytest.approx(-math.log(math.e / (math.e + 1)), abs=1e-12)
    assert ga.shape == (2, 2) and gt.shape == (2, 2)


def test_itemknn_excludes_and_ranks():
    vecs = np.array([[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    out = larp.itemknn(np.array([1.0, 0.0]), ["x", "y", "z"], vecs, 2, {"x"})
    assert out == ["y", "z"]


def test_train_embed_evaluate(corpus, tmp_path):
    start = larp.initial_checkpoint(corpus, dict(hidden=[8], embed_dim=8, queue_capacity=32))
    cfg = dict(batch_size=10, max_epochs=2, patience=1, lr=1e-2, playlist_size=3, validation_seeds=2)
    ck, log = larp.train(corpus, start, [1, 2, 3], cfg)
    assert ck.stage == 3 and ck.has_fusion
    assert [e["stage"] for e in log][0] == 1
    assert all(math.isfinite(e["objective"]) for e in log)

    path = str(tmp_path / "model.ckpt")
    larp.save_checkpoint(ck, path)
    assert larp.load_checkpoint(path).hash == ck.hash

    ids, vecs = larp.embed(ck, corpus.test)
    assert vecs.shape == (24, 8)
    assert np.allclose(np.linalg.norm(vecs, axis=1), 1.0)
    report = larp.evaluate(corpus, ids, vecs, ks=[5, 10], q=2)
    assert 0.0 <= report["recall@10"] <= 1.0

    xy, explained = larp.project_2d(ids, vecs)
    assert xy.shape == (24, 2)
    assert explained[0] >= explained[1] >= 0.0


def test_config_errors(corpus):
    start = larp.initial_checkpoint(corpus, dict(hidden=[8], embed_dim=8, queue_capacity=32))
    with pytest.raises(larp.ConfigError):
        larp.train(corpus, start, [1], dict(max_epochs=1, patience=2))
    with pytest.raises(larp.ConfigError):
        larp.train(corpus, start, [2], dict(max_epochs=1, patience=1))


def test_cli_in_process(tmp_path):
    assert larp.run_cli(["gen-data", "--run-dir", str(tmp_path), "--n-genres", "2", "--tracks-per-genre", "10",
                         "--playlists", "4", "--tracks-per-playlist", "4", "--validation-tracks-per-genre", "4",
                         "--validation-playlists", "2", "--test-tracks-per-genre", "4", "--test-playlists", "2"]) == 0
    c = larp.load_corpus(str(tmp_path / "corpus.jsonl"))
    assert len(c.train) == 20
    assert larp.run_cli(["train"]) == 2
