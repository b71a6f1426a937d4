import hashlib
from pathlib import Path

import numpy as np
import pytest

from regada import synth
from regada.dataio import load_dataset, read_feature_file, read_split
from regada.errors import ConfigError
from regada.metrics import evaluate_scores


def small(**kw):
    base = dict(n_adverbs=4, n_actions=5, n_train=120, n_test=60, d_theta=8, d_x=12, seed=3)
    base.update(kw)
    return synth.SynthConfig(**base)


def digest(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_noise_free_signal_segments_match_target():
    data = synth.generate(small(noise=0.0, distractors=0, t_min=2, t_max=3))
    for s in data.train + data.test:
        seq = data.features[s.video_id].astype(np.float64)
        assert 2 <= len(seq) <= 3
        tgt = data.targets[s.adverb, s.action].astype(np.float32)
        np.testing.assert_array_equal(seq, np.tile(tgt, (len(seq), 1)))


def test_distractors_come_from_other_actions():
    data = synth.generate(small(noise=0.0, distractors=2))
    flat = data.targets.reshape(-1, data.config.d_x).astype(np.float32)
    for s in data.train[:40]:
        seq = data.features[s.video_id]
        assert len(seq) == 3
        hits = [int(np.flatnonzero((flat == row).all(axis=1))[0]) for row in seq]
        acts = [h % data.config.n_actions for h in hits]  # rows are laid out adverb-major
        assert acts.count(s.action) == 1


def test_same_seed_same_bytes(tmp_path):
    a = synth.write(synth.generate(small()), tmp_path / "a")
    b = synth.write(synth.generate(small()), tmp_path / "b")
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    c = synth.write(synth.generate(small(seed=4)), tmp_path / "c")
    assert digest(tmp_path / "a") != digest(tmp_path / "c")
    assert Path(a["manifest"]).read_bytes() == Path(b["manifest"]).read_bytes()
    assert Path(c["vocab"]).exists()


def test_written_layout_loads(tmp_path):
    data = synth.generate(small())
    paths = synth.write(data, tmp_path)
    ds = load_dataset(paths["manifest"], paths["vocab"], paths["embeddings"])
    assert len(ds.samples) == 180
    split = read_split(paths["split"])
    assert len(split["train"]) == 120 and len(split["test"]) == 60
    vid = data.test[0].video_id
    seq = read_feature_file(Path(tmp_path) / "features" / f"{vid}.rgdf")
    np.testing.assert_array_equal(seq, data.features[vid])


def test_antonym_map_is_involution():
    data = synth.generate(small(n_adverbs=8))
    idx = data.vocab.antonym_indices()
    np.testing.assert_array_equal(idx[idx], np.arange(8))
    assert (idx != np.arange(8)).all()


def test_every_label_in_train_and_test():
    data = synth.generate(small())
    for part in (data.train, data.test):
        assert {s.adverb for s in part} == set(range(4))
        assert {s.action for s in part} == set(range(5))


def nn_accuracy(cfg):
    data = synth.generate(cfg)
    scores = synth.nearest_target_scores(data, data.test)
    acts = np.array([s.action for s in data.test])
    advs = np.array([s.adverb for s in data.test])
    return evaluate_scores(scores, acts, advs, data.vocab.antonym_indices())


def test_oracle_is_perfect_without_noise():
    rep = nn_accuracy(small(noise=0.0, distractors=2))
    assert rep.Acc_A == 1.0
    assert rep.mAP_M == pytest.approx(1.0)


def test_difficulty_grows_with_noise():
    accs = [np.mean([nn_accuracy(small(noise=s, n_test=200, seed=k)).Acc_A for k in range(3)])
            for s in (0.0, 2.0, 8.0, 30.0)]
    assert all(a >= b for a, b in zip(accs, accs[1:]))
    assert accs[-1] < accs[0]


def test_antonym_skew_shifts_the_prior():
    data = synth.generate(small(antonym_skew=0.9, n_train=2000, n_test=1))
    advs = np.array([s.adverb for s in data.train])
    assert np.mean(advs % 2 == 0) > 0.85


@pytest.mark.parametrize("bad", [
    {"n_adverbs": 3}, {"t_min": 3, "t_max": 2}, {"noise": -1.0},
    {"antonym_skew": 1.0}, {"n_actions": 1, "distractors": 1},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        synth.generate(small(**bad))


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        synth.SynthConfig.from_dict({"sigma": 0.1})
