import numpy as np
import pytest
from oracles import text_eval
from helpers import perturbed_text_encoder

from regada.autodiff import Tensor, grad_check, ops
from regada.config import TextEncoderConfig
from regada.errors import BatchSizeError, ConfigError, ShapeError, ValidationError
from regada.text_encoder import TextEncoder, WordTables


def test_projection_examples(rng):
    enc = TextEncoder(TextEncoderConfig(d_dim=4), 4, rng)
    phi_a, phi_v = enc.project_words(np.zeros((1, 4)), np.zeros((1, 4)))
    np.testing.assert_array_equal(phi_a.data, 0.0)
    enc.proj_adverb.weight.data = np.eye(4)
    x = rng.standard_normal((3, 4))
    np.testing.assert_array_equal(enc.project_words(x, x)[1].data, x)
    oracle = x @ enc.proj_action.weight.data
    np.testing.assert_allclose(enc.project_words(x, x)[0].data, oracle, atol=1e-12)
    with pytest.raises(ShapeError):
        enc.project_words(np.ones((1, 3)), np.ones((1, 4)))


def test_gate_saturation_returns_main(rng):
    enc = TextEncoder(TextEncoderConfig(d_dim=4), 3, rng)
    enc.omega_r.data = np.zeros(1)
    enc.gate.out.bias.data = np.full(4, 60.0)
    enc.gate.out.weight.data = np.zeros((4, 4))
    main, aux = rng.standard_normal((2, 4)), rng.standard_normal((2, 4))
    np.testing.assert_allclose(enc.compose(main, aux, "eval").data, main, atol=1e-12)


def test_zero_gate_weight_isolates_residual(rng):
    enc = perturbed_text_encoder(rng, d_theta=3, d_dim=4)
    enc.omega_g.data = np.zeros(1)
    main, aux = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    res = enc.res(ops.concat([Tensor(aux), Tensor(main)], axis=-1), "eval", None).data
    np.testing.assert_allclose(enc.compose(main, aux, "eval").data, enc.omega_r.data[0] * res, atol=1e-12)


@pytest.mark.parametrize(
    "flags",
    [
        {},
        {"use_sigmoid": False},
        {"use_residual": False},
        {"share_gate_res_weights": True},
    ],
)
def test_compose_matches_straight_line_oracle(flags):
    rng = np.random.default_rng(3)
    enc = perturbed_text_encoder(rng, **flags)
    words = WordTables(rng.standard_normal((4, 5)), rng.standard_normal((3, 5)))
    adv, act = np.array([0, 1, 3, 2]), np.array([2, 0, 1, 1])
    got = enc(adv, act, words, "eval").data
    for i in range(4):
        want = text_eval(enc, words.adverbs[adv[i]], words.actions[act[i]], enc.proj_adverb, enc.proj_action)
        np.testing.assert_allclose(got[i], want, atol=1e-12)


def test_ablation_flags_alter_structure(rng):
    base = TextEncoder(TextEncoderConfig(d_dim=4), 3, rng)
    shared = TextEncoder(TextEncoderConfig(d_dim=4, share_gate_res_weights=True), 3, rng)
    nores = TextEncoder(TextEncoderConfig(d_dim=4, use_residual=False), 3, rng)
    assert base.res is not None and shared.res is None and nores.res is None
    assert nores.omega_r is None and shared.omega_r is not None
    n_base = len(base.named_parameters())
    assert len(shared.named_parameters()) < n_base


def test_gate_in_open_unit_interval(rng):
    enc = perturbed_text_encoder(rng)
    x = ops.concat([Tensor(rng.standard_normal((8, 6)) * 5), Tensor(rng.standard_normal((8, 6)))], axis=-1)
    g = ops.sigmoid(enc.gate(x, "eval", None)).data
    assert np.all((g > 0) & (g < 1))


def test_action_main_and_pair_modalities(rng):
    words = WordTables(rng.standard_normal((2, 5)), rng.standard_normal((3, 5)), rng.standard_normal((2, 3, 5)))
    enc = perturbed_text_encoder(rng, main_modality="action", auxiliary_modality="adverb")
    got = enc(np.array([1]), np.array([2]), words, "eval").data[0]
    want = text_eval(enc, words.actions[2], words.adverbs[1], enc.proj_action, enc.proj_adverb)
    np.testing.assert_allclose(got, want, atol=1e-12)
    enc = perturbed_text_encoder(rng, main_modality="pair", auxiliary_modality="action")
    got = enc(np.array([1]), np.array([2]), words, "eval").data[0]
    want = text_eval(enc, words.pairs[1, 2], words.actions[2], enc.proj_pair, enc.proj_action)
    np.testing.assert_allclose(got, want, atol=1e-12)
    with pytest.raises(ValidationError):
        enc(np.array([1]), np.array([2]), WordTables(words.adverbs, words.actions), "eval")


def test_config_invariants():
    for bad in ({"n_gate": 0}, {"drop_g": 1.0}, {"main_modality": "adverb", "auxiliary_modality": "adverb"}):
        with pytest.raises(ConfigError):
            TextEncoderConfig(**bad).validate()


def test_train_batch_of_one_rejected(rng):
    enc = perturbed_text_encoder(rng)
    with pytest.raises(BatchSizeError):
        enc.compose(np.ones((1, 6)), np.ones((1, 6)), "train", rng)
    with pytest.raises(ShapeError):
        enc.compose(np.ones((2, 6)), np.ones((2, 5)), "eval")


def test_embed_all_adverbs_rows_independent():
    rng = np.random.default_rng(11)
    enc = perturbed_text_encoder(rng)
    words = WordTables(rng.standard_normal((6, 5)), rng.standard_normal((3, 5)))
    rows = enc.embed_all_adverbs(1, words)
    assert rows.shape == (6, 6)
    for j in range(6):
        single = enc(np.array([j]), np.array([1]), words, "eval").data[0]
        np.testing.assert_allclose(rows[j], single, atol=1e-12)
        want = text_eval(enc, words.adverbs[j], words.actions[1], enc.proj_adverb, enc.proj_action)
        np.testing.assert_allclose(rows[j], want, atol=1e-12)
    one = WordTables(words.adverbs[:1], words.actions)
    np.testing.assert_allclose(enc.embed_all_adverbs(0, one)[0], enc(np.array([0]), np.array([0]), one, "eval").data[0])
    grid = enc.embed_grid(words)
    np.testing.assert_allclose(grid[1], rows, atol=1e-12)


def test_eval_is_deterministic(rng):
    enc = perturbed_text_encoder(rng)
    words = WordTables(rng.standard_normal((4, 5)), rng.standard_normal((3, 5)))
    a = enc.embed_grid(words)
    assert a.tobytes() == enc.embed_grid(words).tobytes()


def test_output_norm_gradient(rng):
    enc = perturbed_text_encoder(rng, drop_g=0.4)
    words = WordTables(rng.standard_normal((4, 5)), rng.standard_normal((3, 5)))
    adv, act = np.array([0, 1, 2, 3, 1]), np.array([2, 0, 1, 1, 2])
    seed = 99

    def f():
        return ops.l2_norm(ops.reshape(enc(adv, act, words, "train", np.random.default_rng(seed)), (-1,)))

    assert grad_check(f, [p for _, p in enc.named_parameters()]) <= 1e-4
