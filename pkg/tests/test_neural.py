import numpy as np
import pytest

from flowdesk import autodiff as ad
from flowdesk import neural as nn


def test_init_deterministic_per_seed():
    spec = nn.MlpSpec((2, 8, 1))
    a = nn.init_mlp(spec, seed=5)
    b = nn.init_mlp(spec, seed=5)
    c = nn.init_mlp(spec, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_param_count():
    spec = nn.MlpSpec((2, 8, 1))
    assert spec.param_count() == 2 * 8 + 8 + 8 * 1 + 1 == 33
    assert nn.init_mlp(spec, 0).size == 33


def test_glorot_bounds():
    spec = nn.MlpSpec((10, 20, 5))
    pv = nn.init_mlp(spec, seed=1)
    w0 = pv.slice("W0")
    assert np.abs(w0).max() <= np.sqrt(6.0 / (10 + 20))
    w1 = pv.slice("W1")
    assert np.abs(w1).max() <= np.sqrt(6.0 / (20 + 5))
    assert np.all(pv.slice("b0") == 0) and np.all(pv.slice("b1") == 0)


def test_mlp_invalid_spec():
    with pytest.raises(ValueError):
        nn.MlpSpec((4,))
    with pytest.raises(ValueError):
        nn.MlpSpec((4, 0, 2))


def _naive_forward(spec, pv, x):
    # straightforward re-implementation used as an oracle
    h = np.atleast_2d(x)
    n_layers = len(spec.layer_widths) - 1
    for i in range(n_layers):
        h = h @ pv.slice(f"W{i}") + pv.slice(f"b{i}")
        if i < n_layers - 1:
            h = np.tanh(h)
    return h


def test_forward_zero_params_zero_output():
    spec = nn.MlpSpec((3, 4, 2))
    pv = nn.init_mlp(spec, 0).with_values(np.zeros(spec.param_count()))
    out = nn.mlp_forward(spec, pv, np.ones((5, 3)))
    assert np.array_equal(out, np.zeros((5, 2)))


def test_forward_single_linear_layer_is_matvec():
    spec = nn.MlpSpec((3, 2))
    pv = nn.init_mlp(spec, seed=2)
    x = np.random.default_rng(0).normal(size=(4, 3))
    out = nn.mlp_forward(spec, pv, x)
    assert np.allclose(out, x @ pv.slice("W0") + pv.slice("b0"), atol=1e-15)


def test_forward_matches_naive_oracle():
    spec = nn.MlpSpec((4, 7, 5, 2))
    pv = nn.init_mlp(spec, seed=9)
    x = np.random.default_rng(1).normal(size=(6, 4))
    assert np.allclose(nn.mlp_forward(spec, pv, x), _naive_forward(spec, pv, x), atol=1e-12)


def test_forward_shape_mismatch():
    spec = nn.MlpSpec((4, 3, 1))
    pv = nn.init_mlp(spec, 0)
    with pytest.raises(ValueError):
        nn.mlp_forward(spec, pv, np.ones((2, 3)))


# -- DeepONet ------------------------------------------------------------------

def _toy_model(seed=0, use_bias=True):
    return nn.build_deeponet(
        nn.MlpSpec((5, 8, 4)), nn.MlpSpec((2, 8, 4)), seed=seed, use_bias=use_bias
    )


def test_deeponet_zero_branch_gives_bias():
    model = _toy_model()
    theta = model.params.values.copy()
    nb = model.branch_spec.param_count()
    theta[:nb] = 0.0  # branch outputs all zeros
    theta[-1] = 1.25  # bias
    model.params = model.params.with_values(theta)
    out = model_eval = nn.deeponet_eval(model, np.ones(5), np.zeros((3, 2)))
    assert np.allclose(out, 1.25, atol=1e-15)


def test_deeponet_latent_one_passthrough():
    model = nn.build_deeponet(
        nn.MlpSpec((3, 1)), nn.MlpSpec((2, 4, 1)), seed=4, use_bias=True
    )
    theta = model.params.values.copy()
    # force branch output to exactly 1 regardless of input
    nb = model.branch_spec.param_count()
    theta[:nb] = 0.0
    theta[nb - 1] = 1.0  # branch bias (last branch param)
    theta[-1] = 0.5  # dot-product bias
    model.params = model.params.with_values(theta)
    y = np.random.default_rng(2).normal(size=(6, 2))
    trunk_out = nn.mlp_forward(
        model.trunk_spec, model.params.values[nb:-1], y
    ).ravel()
    assert np.allclose(nn.deeponet_eval(model, np.zeros(3), y), trunk_out + 0.5, atol=1e-12)


def test_deeponet_matches_explicit_dot_product():
    model = _toy_model(seed=3)
    u = np.random.default_rng(5).normal(size=5)
    y = np.random.default_rng(6).normal(size=(7, 2))
    got = nn.deeponet_eval(model, u, y)
    b_theta, t_theta, bias = model.split(model.params.values)
    b = nn.mlp_forward(model.branch_spec, b_theta, u.reshape(1, -1))
    t = nn.mlp_forward(model.trunk_spec, t_theta, y)
    want = (t * b).sum(axis=1) + bias[0]
    assert np.allclose(got, want, atol=1e-12)


def test_deeponet_linear_in_branch_embedding():
    # superposing two branch inputs at fixed trunk: eval is linear in the embedding
    model = _toy_model(seed=8, use_bias=False)
    y = np.random.default_rng(7).normal(size=(4, 2))
    b_theta, t_theta, _ = model.split(model.params.values)
    t = nn.mlp_forward(model.trunk_spec, t_theta, y)
    e1 = np.random.default_rng(8).normal(size=4)
    e2 = np.random.default_rng(9).normal(size=4)
    lhs = ((e1 + e2) * t).sum(axis=1)
    rhs = (e1 * t).sum(axis=1) + (e2 * t).sum(axis=1)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_deeponet_sensor_mismatch():
    model = _toy_model()
    with pytest.raises(ValueError):
        nn.deeponet_eval(model, np.ones(4), np.zeros((2, 2)))


# -- operator loss ---------------------------------------------------------------

def test_operator_loss_zero_when_equal():
    pred = np.array([1.0, 2.0, 3.0])
    assert nn.operator_loss(pred, pred, "L1", n_samples=1) == 0.0
    assert nn.operator_loss(pred, pred, "L2", n_samples=1) == 0.0


def test_operator_loss_normalizes_by_sample_count_only():
    # n=1, q=2, diffs (1, -2): L1 = 3, L2 = 5
    pred = np.array([1.0, -2.0])
    target = np.zeros(2)
    assert nn.operator_loss(pred, target, "L1", n_samples=1) == pytest.approx(3.0)
    assert nn.operator_loss(pred, target, "L2", n_samples=1) == pytest.approx(5.0)
    # doubling the sample count halves the loss; query count never divides
    assert nn.operator_loss(pred, target, "L2", n_samples=2) == pytest.approx(2.5)


def test_operator_loss_matches_naive_double_loop():
    rng = np.random.default_rng(11)
    n, q = 4, 6
    pred = rng.normal(size=n * q)
    target = rng.normal(size=n * q)
    naive_l1 = sum(
        abs(pred[i * q + j] - target[i * q + j]) for i in range(n) for j in range(q)
    ) / n
    naive_l2 = sum(
        (pred[i * q + j] - target[i * q + j]) ** 2 for i in range(n) for j in range(q)
    ) / n
    assert nn.operator_loss(pred, target, "L1", n) == pytest.approx(naive_l1, abs=1e-12)
    assert nn.operator_loss(pred, target, "L2", n) == pytest.approx(naive_l2, abs=1e-12)


def test_operator_loss_validation():
    with pytest.raises(ValueError):
        nn.operator_loss(np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        nn.operator_loss(np.ones(3), np.ones(3), norm="L3")


# -- Adam ------------------------------------------------------------------------

def test_adam_zero_gradient_keeps_params():
    params = np.array([1.0, -2.0])
    state = nn.AdamState.zeros(2)
    new, state = nn.adam_step(state, params, np.zeros(2), lr=0.1)
    assert np.array_equal(new, params)


def test_adam_first_step_magnitude():
    params = np.zeros(3)
    g = np.array([0.3, -40.0, 1e-3])
    new, _ = nn.adam_step(nn.AdamState.zeros(3), params, g, lr=0.01)
    # bias-corrected first step is ~ -lr * sign(g)
    assert np.allclose(new, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_rejects_nonfinite():
    with pytest.raises(nn.TrainingDiverged):
        nn.adam_step(nn.AdamState.zeros(1), np.zeros(1), np.array([np.nan]), lr=0.1)


def test_adam_converges_on_quadratic_bowl():
    target = np.array([0.7, -0.4, 1.3])
    params = np.zeros(3)
    state = nn.AdamState.zeros(3)
    for _ in range(500):
        g = 2 * (params - target)
        params, state = nn.adam_step(state, params, g, lr=1e-2)
    assert np.abs(params - target).max() < 1e-3


# -- training ----------------------------------------------------------------------

def test_train_memorizes_constant_function():
    sample = nn.OperatorSample(
        u_sensors=np.full(4, 2.0), queries=np.linspace(0, 1, 8).reshape(-1, 1),
        targets=np.full(8, 3.0),
    )
    config = nn.OperatorTrainConfig(
        epochs=2000, lr=2e-2, lr_decay=0.998, batch=1, seed=0, latent_dim=4,
        branch_hidden=(8,), trunk_hidden=(),
    )
    model, history = nn.train_deeponet([sample], config)
    assert history.final < 1e-6
    assert history.final < history.initial


def test_train_deterministic():
    rng = np.random.default_rng(0)
    samples = [
        nn.OperatorSample(
            u_sensors=rng.normal(size=6),
            queries=rng.random((5, 1)),
            targets=rng.normal(size=5),
        )
        for _ in range(4)
    ]
    config = nn.OperatorTrainConfig(epochs=5, lr=1e-3, batch=2, seed=13,
                                    latent_dim=4, branch_hidden=(6,), trunk_hidden=(6,))
    m1, h1 = nn.train_deeponet(samples, config)
    m2, h2 = nn.train_deeponet(samples, config)
    assert np.array_equal(m1.params.values, m2.params.values)
    assert h1.losses == h2.losses


def test_train_empty_dataset_rejected():
    with pytest.raises(ValueError):
        nn.train_deeponet([], nn.OperatorTrainConfig())


def test_checkpoint_roundtrip(tmp_path):
    model = _toy_model(seed=15)
    path = tmp_path / "model.json"
    nn.save_deeponet(model, str(path))
    back = nn.load_deeponet(str(path))
    assert np.array_equal(back.params.values, model.params.values)
    assert back.branch_spec == model.branch_spec
    assert back.trunk_spec == model.trunk_spec
    u = np.random.default_rng(3).normal(size=5)
    y = np.random.default_rng(4).normal(size=(3, 2))
    assert np.array_equal(nn.deeponet_eval(back, u, y), nn.deeponet_eval(model, u, y))
