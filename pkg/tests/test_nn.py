import numpy as np
import pytest

from pushgrasp.nn import (
    AdamState,
    CheckpointError,
    Conv2D,
    ConvTranspose2D,
    Dense,
    Flatten,
    NNError,
    Network,
    Reshape,
    Softplus,
    Tanh,
    adam_step,
    clip_global_norm,
    load_checkpoint,
    save_checkpoint,
)


def fd_gradient(param, loss_fn, step=1e-3):
    """Central finite differences across every entry of param."""
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = param[idx]
        param[idx] = saved + step
        hi = loss_fn()
        param[idx] = saved - step
        lo = loss_fn()
        param[idx] = saved
        grad[idx] = (hi - lo) / (2 * step)
    return grad


def assert_grads_close(analytic, numeric, rel=1e-3):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-2)
    assert (np.abs(analytic - numeric) / denom).max() < rel


def check_network_gradients(net, x, seed=0):
    """Both parameter and input grads of a random-projection loss."""
    net = net.astype(np.float64)
    rng = np.random.default_rng(seed)
    y0 = net.forward(x)
    proj = rng.standard_normal(y0.shape)

    def loss():
        return float((net.forward(x) * proj).sum())

    y, cache = net.forward(x, want_cache=True)
    _, grads = net.backward(cache, proj)
    params = net.params()
    assert net.num_params() <= 500
    for p, g in zip(params, grads):
        assert_grads_close(g, fd_gradient(p, loss))


def test_identity_dense_is_identity():
    layer = Dense(3, 3)
    layer.w[...] = np.eye(3, dtype=np.float32)
    x = np.arange(6, dtype=np.float32).reshape(2, 3)
    y, _ = layer.forward(x)
    assert (y == x).all()


def test_zero_weight_dense_outputs_bias():
    layer = Dense(4, 2)
    layer.b[...] = [1.5, -2.0]
    y, _ = layer.forward(np.ones((3, 4), dtype=np.float32))
    assert np.allclose(y, [[1.5, -2.0]] * 3)


def test_two_layer_forward_matches_hand_computation():
    l1, l2 = Dense(2, 2), Dense(2, 1)
    l1.w[...] = [[1.0, 2.0], [3.0, 4.0]]
    l1.b[...] = [0.5, -0.5]
    l2.w[...] = [[2.0], [-1.0]]
    l2.b[...] = [1.0]
    net = Network([l1, l2])
    x = np.array([[1.0, 1.0]], dtype=np.float32)
    # h = [1+3+0.5, 2+4-0.5] = [4.5, 5.5]; y = 2*4.5 - 5.5 + 1 = 4.5
    assert float(net.forward(x)[0, 0]) == pytest.approx(4.5)


def test_dense_tanh_gradients_match_fd():
    rng = np.random.default_rng(1)
    net = Network([Dense.init(rng, 5, 8), Tanh(), Dense.init(rng, 8, 3)])
    check_network_gradients(net, rng.standard_normal((4, 5)))


def test_conv_gradients_match_fd():
    rng = np.random.default_rng(2)
    net = Network([Conv2D.init(rng, 1, 2), Tanh(), Flatten(),
                   Dense.init(rng, 2 * 3 * 4, 3)])
    check_network_gradients(net, rng.standard_normal((2, 1, 6, 8)))


def test_conv_transpose_gradients_match_fd():
    rng = np.random.default_rng(3)
    net = Network([Dense.init(rng, 4, 2 * 3 * 4), Reshape((2, 3, 4)),
                   ConvTranspose2D.init(rng, 2, 1, output_padding=(0, 1))])
    check_network_gradients(net, rng.standard_normal((2, 4)))


def test_softplus_gradients_match_fd():
    rng = np.random.default_rng(4)
    net = Network([Dense.init(rng, 3, 6), Softplus(), Dense.init(rng, 6, 2)])
    check_network_gradients(net, rng.standard_normal((5, 3)))


def test_conv_transpose_inverts_conv_shapes():
    conv = Conv2D(1, 8)
    oh, ow = conv.out_size(38, 64)
    assert (oh, ow) == (19, 32)
    conv2 = Conv2D(8, 16)
    o2 = conv2.out_size(19, 32)
    assert o2 == (10, 16)
    up1 = ConvTranspose2D(16, 8, output_padding=(0, 1))
    assert up1.out_size(10, 16) == (19, 32)
    up2 = ConvTranspose2D(8, 1, output_padding=(1, 1))
    assert up2.out_size(19, 32) == (38, 64)


def test_zero_output_gradient_gives_zero_param_gradients():
    rng = np.random.default_rng(5)
    net = Network([Dense.init(rng, 3, 4), Tanh()])
    y, cache = net.forward(rng.standard_normal((2, 3)).astype(np.float32),
                           want_cache=True)
    _, grads = net.backward(cache, np.zeros_like(y))
    assert all((g == 0).all() for g in grads)


def test_frozen_layer_reports_zero_gradients():
    rng = np.random.default_rng(6)
    first = Dense.init(rng, 3, 4)
    first.frozen = True
    net = Network([first, Tanh(), Dense.init(rng, 4, 2)])
    x = rng.standard_normal((2, 3)).astype(np.float32)
    y, cache = net.forward(x, want_cache=True)
    _, grads = net.backward(cache, np.ones_like(y))
    assert (grads[0] == 0).all() and (grads[1] == 0).all()
    assert not (grads[2] == 0).all()


def test_stale_cache_rejected():
    rng = np.random.default_rng(7)
    net = Network([Dense.init(rng, 3, 3)])
    x = rng.standard_normal((1, 3)).astype(np.float32)
    y, cache = net.forward(x, want_cache=True)
    net.mark_updated()
    with pytest.raises(NNError):
        net.backward(cache, np.ones_like(y))


def test_forward_traps_non_finite():
    layer = Dense(2, 2)
    layer.w[...] = [[np.inf, 0], [0, 0]]
    net = Network([layer])
    with pytest.raises(NNError):
        net.forward(np.ones((1, 2), dtype=np.float32))


def test_adam_zero_gradient_keeps_params():
    params = [np.array([1.0, -2.0], dtype=np.float32)]
    state = AdamState.for_params(params)
    adam_step(params, [np.zeros(2, dtype=np.float32)], state)
    assert state.step == 1
    assert np.allclose(params[0], [1.0, -2.0])


def test_adam_first_step_magnitude_is_learning_rate():
    params = [np.zeros(3, dtype=np.float32)]
    state = AdamState.for_params(params, lr=1e-3)
    grad = np.array([0.5, -0.25, 2.0], dtype=np.float32)
    adam_step(params, [grad.copy()], state)
    # First bias-corrected step is lr * g / (|g| + eps) = lr * sign(g).
    expected = -1e-3 * np.sign(grad) * (np.abs(grad) / (np.abs(grad) + 1e-8))
    assert np.allclose(params[0], expected, atol=1e-9)


def test_adam_optimizes_convex_quadratic():
    rng = np.random.default_rng(8)
    target = rng.standard_normal(10).astype(np.float32)
    params = [np.zeros(10, dtype=np.float32)]
    state = AdamState.for_params(params, lr=0.05)
    first_loss = float(((params[0] - target) ** 2).sum())
    for _ in range(200):
        grad = 2.0 * (params[0] - target)
        adam_step(params, [grad], state)
    final_loss = float(((params[0] - target) ** 2).sum())
    assert final_loss < first_loss / 100


def test_adam_rejects_non_finite_gradients():
    params = [np.zeros(2, dtype=np.float32)]
    state = AdamState.for_params(params)
    with pytest.raises(NNError):
        adam_step(params, [np.array([np.nan, 0.0], dtype=np.float32)], state)


def test_clip_global_norm():
    grads = [np.array([3.0, 4.0]), np.array([0.0])]
    norm = clip_global_norm(grads, max_norm=1.0)
    assert norm == pytest.approx(5.0)
    assert np.allclose(grads[0], [0.6, 0.8])


def make_net(seed=9):
    rng = np.random.default_rng(seed)
    return Network([Conv2D.init(rng, 1, 2), Tanh(), Flatten(),
                    Dense.init(rng, 2 * 3 * 4, 5), Softplus()])


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    net = make_net()
    net.version = 7
    state = AdamState.for_params(net.params(), lr=2e-3)
    state.m[0][...] = 0.25
    state.step = 11
    path = str(tmp_path / "ckpt.bin")
    save_checkpoint(path, {"net": net}, adam=state, extras={"note": "x"})
    nets, adam, extras = load_checkpoint(path)
    restored = nets["net"]
    assert restored.version == 7
    assert extras == {"note": "x"}
    assert adam.step == 11 and adam.lr == pytest.approx(2e-3)
    for a, b in zip(net.params(), restored.params()):
        assert a.dtype == b.dtype == np.float32
        assert (a == b).all()
    assert (adam.m[0] == state.m[0]).all()
    # Forward outputs are bit-identical after the roundtrip.
    x = np.random.default_rng(0).standard_normal((2, 1, 6, 8)).astype(np.float32)
    assert (net.forward(x) == restored.forward(x)).all()


def test_checkpoint_truncated_blob_rejected(tmp_path):
    net = make_net()
    path = str(tmp_path / "ckpt.bin")
    save_checkpoint(path, {"net": net})
    data = open(path, "rb").read()
    open(path, "wb").write(data[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_unsupported_version_rejected(tmp_path):
    net = make_net()
    path = str(tmp_path / "ckpt.bin")
    save_checkpoint(path, {"net": net})
    import json
    import struct
    raw = open(path, "rb").read()
    (mlen,) = struct.unpack("<I", raw[:4])
    manifest = json.loads(raw[4:4 + mlen])
    manifest["format_version"] = 99
    payload = json.dumps(manifest).encode()
    open(path, "wb").write(struct.pack("<I", len(payload)) + payload + raw[4 + mlen:])
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_checkpoint_preserves_frozen_flags(tmp_path):
    net = make_net()
    net.layers[0].frozen = True
    path = str(tmp_path / "ckpt.bin")
    save_checkpoint(path, {"net": net})
    nets, _, _ = load_checkpoint(path)
    assert nets["net"].layers[0].frozen
    assert not nets["net"].layers[3].frozen
