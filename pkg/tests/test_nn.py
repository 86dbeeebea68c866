import numpy as np
import pytest

from gdflab import autodiff as ad
from gdflab.nn import (AdamState, MlpSpec, Params, adam_step, discriminator_spec, forward,
                       generator_spec, init_params)

from gradcheck import check


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec((4,))
    with pytest.raises(ValueError):
        MlpSpec((4, 0, 1))


def test_architectures():
    assert generator_spec().layer_sizes == (256, 128, 128, 2)
    d = discriminator_spec()
    assert d.layer_sizes == (2, 128, 128, 1) and d.output_activation == "sigmoid"


def test_init_deterministic_and_bounded():
    spec = generator_spec()
    a = init_params(spec, np.random.default_rng(7))
    b = init_params(spec, np.random.default_rng(7))
    c = init_params(spec, np.random.default_rng(8))
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.arrays(), b.arrays()))
    assert any(x.tobytes() != y.tobytes() for x, y in zip(a.arrays(), c.arrays()))
    last = a.weights[-1].value
    assert last.shape == (128, 2)
    assert np.all(np.abs(last) <= np.sqrt(6 / 130))
    assert all(np.all(bias.value == 0) for bias in a.biases)


def test_forward_zero_weights_sigmoid_half():
    spec = discriminator_spec()
    params = init_params(spec, np.random.default_rng(0))
    for p in params:
        p.value[...] = 0.0
    with ad.Tape():
        out = forward(spec, params, ad.constant(np.random.default_rng(1).standard_normal((5, 2))))
    assert np.all(out.value == 0.5)


def test_forward_identity_linear_layer():
    spec = MlpSpec((3, 3))
    params = Params([ad.leaf(np.eye(3))], [ad.leaf(np.zeros((1, 3)))])
    x = np.random.default_rng(2).standard_normal((4, 3))
    with ad.Tape():
        assert np.array_equal(forward(spec, params, ad.constant(x)).value, x)


def test_generator_shape_contract():
    spec = generator_spec()
    params = init_params(spec, np.random.default_rng(0))
    with ad.Tape():
        out = forward(spec, params, ad.constant(np.random.default_rng(0).standard_normal((512, 256))))
    assert out.shape == (512, 2)
    with ad.Tape(), pytest.raises(ValueError):
        forward(spec, params, ad.constant(np.ones((3, 5))))


def test_forward_bounded_inputs_stay_finite():
    spec = discriminator_spec()
    rng = np.random.default_rng(4)
    params = init_params(spec, rng)
    for p in params:
        p.value[...] = rng.uniform(-1e3, 1e3, size=p.value.shape)
    with ad.Tape():
        out = forward(spec, params, ad.constant(rng.uniform(-1e3, 1e3, size=(64, 2))))
    assert np.all(np.isfinite(out.value))


def test_mlp_gradient_matches_finite_differences():
    spec = MlpSpec((3, 5, 4, 1), output_activation="sigmoid")
    rng = np.random.default_rng(9)
    x = ad.constant(rng.standard_normal((6, 3)))
    template = init_params(spec, rng)
    arrays = [p.value + rng.standard_normal(p.value.shape) * 0.1 for p in template]

    def build(leaves):
        params = Params(leaves[0::2], leaves[1::2])
        return ad.neg(ad.mean_all(ad.log(forward(spec, params, x))))
    assert check(build, arrays) <= 1.0


def _scalar_params(value):
    return Params([ad.leaf([[value]])], [ad.leaf([[0.0]])])


def test_adam_first_step_is_lr_times_sign():
    params = _scalar_params(1.0)
    state = AdamState.for_params(params, lr=0.01)
    params.weights[0].grad[...] = 3.7
    adam_step(state, params)
    assert params.weights[0].value[0, 0] == pytest.approx(1.0 - 0.01, abs=1e-9)
    assert params.weights[0].grad[0, 0] == 0.0
    assert state.t == 1


def test_adam_zero_grad_is_fixed_point():
    spec = MlpSpec((2, 3, 1))
    params = init_params(spec, np.random.default_rng(0))
    before = [a.copy() for a in params.arrays()]
    state = AdamState.for_params(params, lr=0.1)
    for _ in range(3):
        adam_step(state, params)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(before, params.arrays()))


def test_adam_quadratic_bowl():
    # Adam moves about lr per step, so 500 steps cover at most ~0.5
    params = _scalar_params(0.4)
    w = params.weights[0]
    state = AdamState.for_params(params, lr=0.001)
    for _ in range(500):
        w.grad[...] = 2 * w.value
        adam_step(state, params)
    assert abs(w.value[0, 0]) < 0.5 * 0.4


def test_adam_rejects_non_finite_gradient():
    params = _scalar_params(1.0)
    state = AdamState.for_params(params, lr=0.1)
    params.biases[0].grad[...] = np.nan
    with pytest.raises(FloatingPointError, match="layer0.bias"):
        adam_step(state, params)


def test_frozen_params_receive_no_gradient():
    spec = MlpSpec((2, 1))
    params = init_params(spec, np.random.default_rng(0))
    x = ad.leaf(np.ones((3, 2)))
    with ad.Tape() as tape:
        ad.backward(tape, ad.sum_all(forward(spec, params.frozen(), x)))
    assert np.all(params.weights[0].grad == 0)
    assert np.any(x.grad != 0)
