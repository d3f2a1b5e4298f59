import numpy as np
import pytest

from alpsched.nn import (
    AdamConfig,
    CheckpointError,
    ParameterStore,
    Tensor,
    adam_step,
    backward,
    clamp,
    concat,
    exp,
    gru_cell,
    init_uniform,
    linear,
    load_checkpoint,
    log,
    masked_softmax,
    matmul,
    mean,
    multi_head_attention,
    relu,
    reshape,
    save_checkpoint,
    sigmoid,
    softmax,
    square,
    tanh,
    tsum,
)
from alpsched.nn.autodiff import NonFiniteError, take

FD_STEP = 1e-5
FD_TOL = 1e-4


def numeric_grad(fn, x, step=FD_STEP):
    """Central differences of a scalar function over every entry of x."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        hi = fn()
        x[idx] = orig - step
        lo = fn()
        x[idx] = orig
        grad[idx] = (hi - lo) / (2 * step)
        it.iternext()
    return grad


def check_grad(build_loss, *arrays):
    """Compare backward() gradients with central differences for each input."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build_loss(*tensors)
    backward(loss)
    for tensor, arr in zip(tensors, arrays):
        fn = lambda: float(build_loss(*[Tensor(a) for a in arrays]).data)
        num = numeric_grad(fn, arr)
        ana = tensor.grad
        scale = np.maximum(np.abs(num), np.abs(ana))
        err = np.abs(num - ana) / np.maximum(scale, 1e-6)
        assert err.max() < FD_TOL, f"gradient mismatch: max rel err {err.max():.2e}"


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# --- forward sanity ------------------------------------------------------------

def test_relu_sigmoid_values():
    assert relu(Tensor([-1.0, 2.0])).data.tolist() == [0.0, 2.0]
    assert sigmoid(Tensor(0.0)).data == pytest.approx(0.5)


def test_softmax_constant_is_uniform():
    out = softmax(Tensor([3.3, 3.3, 3.3, 3.3]))
    assert out.data == pytest.approx(np.full(4, 0.25))


def test_softmax_scale():
    x = np.array([0.2, -1.0, 0.5])
    out = softmax(Tensor(x), scale=2.5)
    e = np.exp(x * 2.5)
    assert out.data == pytest.approx(e / e.sum())


def test_rank_limit_and_finite_guard():
    with pytest.raises(ValueError):
        Tensor(np.zeros((2, 2, 2, 2)))
    with pytest.raises(NonFiniteError):
        Tensor([np.nan, 1.0])
    with np.errstate(divide="ignore"), pytest.raises(NonFiniteError):
        log(Tensor([0.0]))  # -inf output trips the check


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError):
        matmul(Tensor(np.zeros(3)), Tensor(np.zeros((3, 2))))


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        backward(Tensor(np.zeros(3), requires_grad=True))


# --- gradient checks per op -----------------------------------------------------

def test_grad_arithmetic(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4))
    check_grad(lambda x, y: tsum(x * y + x - 0.5 * y), a, b)
    check_grad(lambda x, y: tsum(x / (y * y + 1.0)), a, b)


def test_grad_broadcast_bias(rng):
    x = rng.standard_normal((5, 3))
    bias = rng.standard_normal(3)
    check_grad(lambda a, b: tsum(square(a + b)), x, bias)


def test_grad_matmul(rng):
    a = rng.standard_normal((4, 3))
    b = rng.standard_normal((3, 2))
    check_grad(lambda x, y: tsum(square(matmul(x, y))), a, b)


def test_grad_activations(rng):
    x = rng.standard_normal((3, 5)) * 2
    check_grad(lambda t: tsum(square(relu(t) + 0.1)), x)
    check_grad(lambda t: tsum(sigmoid(t) * 3.0), x)
    check_grad(lambda t: tsum(tanh(t)), x)
    check_grad(lambda t: tsum(exp(0.3 * t)), x)
    check_grad(lambda t: tsum(log(square(t) + 1.0)), x)


def test_grad_clamp(rng):
    x = rng.uniform(-3, 3, size=(4, 4))
    check_grad(lambda t: tsum(square(clamp(t, -1.0, 1.0))), x)


def test_grad_reductions(rng):
    x = rng.standard_normal((4, 6))
    check_grad(lambda t: mean(square(t)), x)
    check_grad(lambda t: tsum(square(tsum(t, axis=1))), x)
    check_grad(lambda t: tsum(square(mean(t, axis=0))), x)


def test_grad_concat_take_reshape(rng):
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal((3, 4))
    check_grad(lambda x, y: tsum(square(concat([x, y], axis=1))), a, b)
    x = rng.standard_normal((5, 3))
    rows = np.array([0, 2, 2, 4])
    check_grad(lambda t: tsum(square(take(t, rows))), x)
    check_grad(lambda t: tsum(square(take(t, (slice(None), 1)))), x)
    check_grad(lambda t: tsum(square(reshape(t, (3, 5)))), x)


def test_grad_softmax(rng):
    x = rng.standard_normal((4, 5))
    w = rng.standard_normal((4, 5))
    check_grad(lambda t: tsum(Tensor(w) * softmax(t, scale=1.7)), x)


def test_grad_masked_softmax(rng):
    x = rng.standard_normal((4, 4))
    mask = ~np.eye(4, dtype=bool)
    w = rng.standard_normal((4, 4))
    check_grad(lambda t: tsum(Tensor(w) * masked_softmax(t, mask)), x)


def test_masked_softmax_empty_row_is_zero():
    x = Tensor(np.zeros((2, 2)), requires_grad=True)
    mask = np.array([[False, False], [True, True]])
    out = masked_softmax(x, mask)
    assert out.data[0] == pytest.approx([0.0, 0.0])
    assert out.data[1] == pytest.approx([0.5, 0.5])


# --- layers ----------------------------------------------------------------------

def gru_weights(rng, width):
    return {
        "wz": Tensor(init_uniform(rng, 2 * width, width), requires_grad=True),
        "wr": Tensor(init_uniform(rng, 2 * width, width), requires_grad=True),
        "wh": Tensor(init_uniform(rng, 2 * width, width), requires_grad=True),
        "bz": Tensor(np.zeros(width), requires_grad=True),
        "br": Tensor(np.zeros(width), requires_grad=True),
        "bh": Tensor(np.zeros(width), requires_grad=True),
    }


def test_gru_zero_weights_halves_state(rng):
    width = 6
    weights = {k: Tensor(np.zeros((2 * width, width))) for k in ("wz", "wr", "wh")}
    weights |= {k: Tensor(np.zeros(width)) for k in ("bz", "br", "bh")}
    h = rng.standard_normal((3, width))
    out = gru_cell(Tensor(h), Tensor(np.zeros((3, width))), weights)
    assert out.data == pytest.approx(0.5 * h)


def test_gru_preserves_unit_interval(rng):
    width = 8
    weights = gru_weights(rng, width)
    h = rng.uniform(-0.999, 0.999, size=(5, width))
    m = rng.standard_normal((5, width)) * 3
    out = gru_cell(Tensor(h), Tensor(m), weights)
    assert (np.abs(out.data) < 1.0).all()


def test_gru_gradcheck(rng):
    width = 4
    h = rng.standard_normal((2, width))
    m = rng.standard_normal((2, width))
    wz = init_uniform(rng, 2 * width, width)
    wr = init_uniform(rng, 2 * width, width)
    wh = init_uniform(rng, 2 * width, width)

    def loss(th, tm, twz, twr, twh):
        weights = {
            "wz": twz, "wr": twr, "wh": twh,
            "bz": Tensor(np.zeros(width)), "br": Tensor(np.zeros(width)), "bh": Tensor(np.zeros(width)),
        }
        return tsum(square(gru_cell(th, tm, weights)))

    check_grad(loss, h, m, wz, wr, wh)


def test_attention_uniform_when_keys_identical(rng):
    n, width, heads = 4, 8, 2
    h = np.tile(rng.standard_normal((1, width)), (n, 1))  # identical rows
    weights = {f"w{p}{k}": Tensor(init_uniform(rng, width, width // heads))
               for p in "qkv" for k in range(heads)}
    mask = ~np.eye(n, dtype=bool)
    out = multi_head_attention(Tensor(h), weights, heads, mask)
    # with identical values every mix equals the shared value projection
    assert out.data == pytest.approx(np.tile(out.data[:1], (n, 1)))


def test_attention_single_neighbor_copies_value(rng):
    width, heads = 6, 1
    h = rng.standard_normal((2, width))
    weights = {f"w{p}0": Tensor(init_uniform(rng, width, width)) for p in "qkv"}
    mask = np.array([[False, True], [True, False]])
    out = multi_head_attention(Tensor(h), weights, heads, mask)
    values = h @ weights["wv0"].data
    assert out.data[0] == pytest.approx(values[1])
    assert out.data[1] == pytest.approx(values[0])


def test_attention_rows_sum_to_one(rng):
    from alpsched.nn.autodiff import masked_softmax as msm

    scores = Tensor(rng.standard_normal((6, 6)))
    mask = ~np.eye(6, dtype=bool)
    alpha = msm(scores, mask)
    assert alpha.data.sum(axis=1) == pytest.approx(np.ones(6), abs=1e-12)


def test_attention_gradcheck(rng):
    width, heads = 4, 2
    h = rng.standard_normal((3, width))
    ws = {f"w{p}{k}": init_uniform(rng, width, width // heads) for p in "qkv" for k in range(heads)}
    mask = ~np.eye(3, dtype=bool)
    names = sorted(ws)

    def loss(th, *tws):
        weights = dict(zip(names, tws))
        return tsum(square(multi_head_attention(th, weights, heads, mask)))

    check_grad(loss, h, *[ws[k] for k in names])


# --- optimizer ---------------------------------------------------------------------

def test_adam_zero_gradient_is_noop():
    store = ParameterStore()
    store.add("w", np.array([1.0, -2.0, 3.0]))
    adam_step(store, {"w": np.zeros(3)}, AdamConfig(lr=0.1))
    assert store["w"].data == pytest.approx([1.0, -2.0, 3.0])


def test_adam_matches_reference_formula():
    # single unclipped step against the textbook update
    store = ParameterStore()
    store.add("w", np.array([3.0]))
    g = np.array([6.0])
    cfg = AdamConfig(lr=0.5)
    adam_step(store, {"w": g}, cfg)
    m_hat = (0.1 * 6.0) / (1 - 0.9)
    v_hat = (0.001 * 36.0) / (1 - 0.999)
    expected = 3.0 - 0.5 * m_hat / (np.sqrt(v_hat) + cfg.eps)
    assert store["w"].data[0] == pytest.approx(expected)


def test_adam_clips_before_moments():
    lo = ParameterStore()
    hi = ParameterStore()
    lo.add("w", np.array([0.0]))
    hi.add("w", np.array([0.0]))
    cfg = AdamConfig(lr=0.1, clip=10.0)
    adam_step(lo, {"w": np.array([10.0])}, cfg)
    adam_step(hi, {"w": np.array([50.0])}, cfg)
    # a gradient of 50 behaves exactly like the clipped value 10
    assert hi["w"].data == pytest.approx(lo["w"].data)
    assert hi.moment1["w"] == pytest.approx(lo.moment1["w"])


def test_adam_rejects_nan_gradient():
    store = ParameterStore()
    store.add("w", np.array([0.0]))
    with pytest.raises(NonFiniteError):
        adam_step(store, {"w": np.array([np.nan])}, AdamConfig())


def test_quadratic_convergence():
    # loss = sum(w^2): Adam should walk toward zero
    store = ParameterStore()
    store.add("w", np.array([3.0, -2.0]))
    cfg = AdamConfig(lr=0.05)
    for _ in range(400):
        w = store["w"]
        w.zero_grad()
        loss = tsum(square(w))
        backward(loss)
        adam_step(store, store.gradients(), cfg)
    assert np.abs(store["w"].data).max() < 0.05


def test_analytic_gradient_unclipped():
    # loss = sum(w^2) at w=3 has gradient 6, below the clip threshold
    store = ParameterStore()
    w = store.add("w", np.array([3.0]))
    loss = tsum(square(w))
    backward(loss)
    assert w.grad == pytest.approx([6.0])


# --- parameter store / checkpoints ---------------------------------------------

def test_store_rejects_duplicates():
    store = ParameterStore()
    store.add("w", np.zeros(2))
    with pytest.raises(ValueError):
        store.add("w", np.zeros(2))


def test_checkpoint_roundtrip_bit_exact(tmp_path, rng):
    store = ParameterStore()
    store.add("a.w", rng.standard_normal((4, 3)))
    store.add("a.b", rng.standard_normal(3))
    store.add("scalar", np.array(2.5))
    adam_step(store, {"a.w": rng.standard_normal((4, 3))}, AdamConfig(lr=1e-3))
    path = tmp_path / "model.ckpt"
    save_checkpoint(store, path)
    back = load_checkpoint(path)
    assert back.names() == store.names()
    assert back.step_count == store.step_count
    for name in store.names():
        assert (back[name].data == store[name].data).all()
        assert (back.moment1[name] == store.moment1[name]).all()
        assert (back.moment2[name] == store.moment2[name]).all()


def test_checkpoint_truncated_and_bad_magic(tmp_path, rng):
    store = ParameterStore()
    store.add("w", rng.standard_normal((8, 8)))
    path = tmp_path / "model.ckpt"
    save_checkpoint(store, path)
    blob = path.read_bytes()
    (tmp_path / "trunc.ckpt").write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(tmp_path / "trunc.ckpt")
    (tmp_path / "bad.ckpt").write_bytes(b"NOTMAGIC" + blob[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(tmp_path / "bad.ckpt")


def test_checkpoint_version_mismatch(tmp_path):
    import struct

    store = ParameterStore()
    store.add("w", np.zeros(2))
    path = tmp_path / "model.ckpt"
    save_checkpoint(store, path)
    blob = bytearray(path.read_bytes())
    blob[8:12] = struct.pack("<I", 99)
    (tmp_path / "v99.ckpt").write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(tmp_path / "v99.ckpt")


# --- tape -----------------------------------------------------------------------

def test_backward_visits_shared_nodes_once(rng):
    # diamond graph: y = a*b + a*c shares a; gradient accumulates exactly once per path
    a = Tensor(np.array(2.0), requires_grad=True)
    b = Tensor(np.array(3.0), requires_grad=True)
    c = Tensor(np.array(5.0), requires_grad=True)
    y = a * b + a * c
    backward(y)
    assert a.grad == pytest.approx(8.0)
    assert b.grad == pytest.approx(2.0)
    assert c.grad == pytest.approx(2.0)


def test_forward_deterministic(rng):
    x = rng.standard_normal((4, 4))
    w = rng.standard_normal((4, 4))
    one = matmul(Tensor(x), Tensor(w)).data
    two = matmul(Tensor(x), Tensor(w)).data
    assert (one == two).all()
