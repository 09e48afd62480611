import numpy as np
import pytest

from codist.models import (
    CDAEModel,
    MFModel,
    ModelError,
    Optimizer,
    OptimizerConfig,
    OptimizerError,
    load_checkpoint,
    new_model,
    params_equal,
    save_checkpoint,
)


def test_mf_zero_params_zero_logit():
    m = MFModel(np.zeros((2, 3)), np.zeros((4, 3)), np.zeros(4))
    assert m.forward_logit(0, 0) == 0.0


def test_mf_hand_computed_logit():
    # [1,2].[3,4] + 0.5 = 11.5
    m = MFModel(np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]),
                np.array([0.5]))
    assert m.forward_logit(0, 0) == pytest.approx(11.5, abs=0)


def test_mf_subset_matches_per_item_calls():
    m = MFModel.init(3, 6, 4, seed=0)
    z = m.score_user(1)
    for i in range(6):
        assert z[i] == pytest.approx(m.forward_logit(1, i), rel=1e-15)


def test_mf_index_range_errors():
    m = MFModel.init(2, 3, 2, seed=0)
    with pytest.raises(ModelError):
        m.forward_logit(0, 3)
    with pytest.raises(ModelError):
        m.begin_user(2)


def test_cdae_zero_weights_logit_is_decoder_bias():
    m = CDAEModel(np.zeros((4, 3)), np.zeros((2, 3)), np.zeros(3),
                  np.zeros((4, 3)), np.arange(4.0), corruption=0.0)
    # hidden = sigmoid(0) = 0.5 but decoder weights are zero
    z = m.score_user(0, pos_items=np.array([1]))
    assert np.array_equal(z, np.arange(4.0))


def test_cdae_training_score_requires_mask():
    m = CDAEModel.init(2, 4, 3, seed=0, corruption=0.5)
    with pytest.raises(ModelError, match="corrupt_mask"):
        m.score_user(0, pos_items=np.array([0, 1]), training=True)
    # inference never corrupts, mask not needed
    m.score_user(0, pos_items=np.array([0, 1]), training=False)


def test_cdae_corrupt_mask_drops_inputs():
    m = CDAEModel.init(2, 4, 3, seed=1, corruption=0.5)
    pos = np.array([0, 1, 2])
    z_keep = m.score_user(0, pos, training=True, corrupt_mask=np.array([True] * 3))
    z_none = m.score_user(0, pos, training=False)
    assert np.allclose(z_keep, z_none)
    z_drop = m.score_user(0, pos, training=True,
                          corrupt_mask=np.array([False, False, False]))
    z_empty = m.score_user(0, np.empty(0, dtype=np.int64))
    assert np.allclose(z_drop, z_empty)


def test_gaussian_init_deterministic():
    a = MFModel.init(5, 7, 3, seed=42)
    b = MFModel.init(5, 7, 3, seed=42)
    c = MFModel.init(5, 7, 3, seed=43)
    assert params_equal(a, b)
    assert not params_equal(a, c)


def test_param_count_formulas():
    m = MFModel.init(10, 20, 4, seed=0)
    assert m.param_count() == 4 * (10 + 20) + 20
    c = CDAEModel.init(10, 20, 4, seed=0)
    assert c.param_count() == 2 * 20 * 4 + 10 * 4 + 4 + 20


def test_sgd_step_hand_value():
    # p=1, g=0.5, lr=0.1, l2=0: p' = 1 - 0.1*0.5 = 0.95
    cfg = OptimizerConfig(kind="sgd", learning_rate=0.1, l2=0.0)
    p = np.array([1.0])
    opt = Optimizer(cfg, {"p": p})
    opt.step_dense("p", p, np.array([0.5]))
    assert p[0] == pytest.approx(0.95, abs=0)


def test_adagrad_first_step_hand_value():
    # acc = g^2 = 4; p' = 1 - 0.2*2/sqrt(4 + 1e-8)
    cfg = OptimizerConfig(kind="adagrad", learning_rate=0.2, l2=0.0)
    p = np.array([1.0])
    opt = Optimizer(cfg, {"p": p})
    opt.step_dense("p", p, np.array([2.0]))
    assert p[0] == pytest.approx(1.0 - 0.2 * 2.0 / np.sqrt(4.0 + 1e-8), rel=1e-14)


def test_adagrad_accumulator_excludes_l2():
    cfg = OptimizerConfig(kind="adagrad", learning_rate=0.1, l2=0.5)
    p = np.array([2.0])
    opt = Optimizer(cfg, {"p": p})
    opt.step_dense("p", p, np.array([3.0]))
    assert opt.acc["p"][0] == pytest.approx(9.0, abs=0)


def test_adagrad_accumulator_monotone():
    cfg = OptimizerConfig(kind="adagrad", learning_rate=0.1, l2=0.0)
    p = np.ones(4)
    opt = Optimizer(cfg, {"p": p})
    rng = np.random.default_rng(0)
    prev = opt.acc["p"].copy()
    for _ in range(10):
        opt.step_dense("p", p, rng.normal(size=4))
        assert np.all(opt.acc["p"] >= prev)
        prev = opt.acc["p"].copy()


def test_non_finite_gradient_rejected():
    cfg = OptimizerConfig(kind="sgd", learning_rate=0.1)
    p = np.array([1.0])
    opt = Optimizer(cfg, {"p": p})
    with pytest.raises(OptimizerError, match="non-finite"):
        opt.step_dense("p", p, np.array([np.nan]))
    assert p[0] == 1.0  # untouched


def test_mf_context_apply_matches_manual_sgd():
    m = MFModel.init(3, 5, 2, seed=0)
    ref = m.copy()
    cfg = OptimizerConfig(kind="sgd", learning_rate=0.1, l2=0.01)
    opt = Optimizer(cfg, m.params())
    items = np.array([1, 3], dtype=np.int64)
    gz = np.array([0.25, -0.5])
    grads = ref.begin_user(0).backward(items, gz)
    m.begin_user(0).apply(items, gz, opt)
    for name, (idx, g) in grads.items():
        arr = ref.params()[name]
        if idx is None:
            arr -= 0.1 * (g + 0.01 * arr)
        else:
            arr[idx] -= 0.1 * (g + 0.01 * arr[idx])
    for name in ref.params():
        assert np.allclose(m.params()[name], ref.params()[name], rtol=1e-12)


def test_cdae_context_apply_matches_step_rows():
    m = CDAEModel.init(3, 5, 2, seed=0, corruption=0.0)
    ref = m.copy()
    cfg = OptimizerConfig(kind="adagrad", learning_rate=0.2, l2=0.001)
    opt_a = Optimizer(cfg, m.params())
    opt_b = Optimizer(cfg, ref.params())
    pos = np.array([0, 2], dtype=np.int64)
    items = np.array([1, 4], dtype=np.int64)
    gz = np.array([0.3, -0.7])
    m.begin_user(1, pos).apply(items, gz, opt_a)
    grads = ref.begin_user(1, pos).backward(items, gz)
    for name, (idx, g) in grads.items():
        if idx is None:
            opt_b.step_dense(name, ref.params()[name], g)
        else:
            opt_b.step_rows(name, ref.params()[name], idx, g)
    assert params_equal(m, ref)


def test_checkpoint_roundtrip_mf(tmp_path):
    m = MFModel.init(4, 6, 3, seed=9)
    path = tmp_path / "ck.bin"
    save_checkpoint(m, path)
    back = load_checkpoint(path)
    assert isinstance(back, MFModel)
    assert params_equal(m, back)
    assert back.seed == 9


def test_checkpoint_roundtrip_cdae(tmp_path):
    m = CDAEModel.init(4, 6, 3, seed=9, corruption=0.25)
    path = tmp_path / "ck.bin"
    save_checkpoint(m, path)
    back = load_checkpoint(path)
    assert isinstance(back, CDAEModel)
    assert back.corruption == 0.25
    assert params_equal(m, back)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "ck.bin"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 64)
    with pytest.raises(ModelError, match="magic|checkpoint"):
        load_checkpoint(path)


def test_checkpoint_rejects_truncated(tmp_path):
    m = MFModel.init(4, 6, 3, seed=9)
    path = tmp_path / "ck.bin"
    save_checkpoint(m, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:len(raw) - 16])
    with pytest.raises(ModelError, match="truncated"):
        load_checkpoint(path)


def test_new_model_factory():
    assert new_model("mf", 2, 3, 2, seed=0).kind == "mf"
    assert new_model("cdae", 2, 3, 2, seed=0).kind == "cdae"
    with pytest.raises(ValueError):
        new_model("gbdt", 2, 3, 2, seed=0)
