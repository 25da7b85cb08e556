import numpy as np
import pytest

from qtl.ansatz import AnsatzSpec, Family, build, forward, init_params
from qtl.data import Dataset
from qtl.grad import feature_jacobian, finite_diff_grad, model_grad, shift_rule_grad, shift_rule_jacobian
from qtl.hybrid import Adapter, ClassicalHead, HybridModel, init_model

RA, SE, SQ = Family.REAL_AMPLITUDES, Family.STRONG_ENTANGLING, Family.SINGLE_QUBIT


def single_rotation():
    # one free angle: <z> = cos(2 phi) for zero features
    return build(AnsatzSpec(RA, 1, 1))


@pytest.mark.parametrize("phi, expected", [(0.0, 0.0), (np.pi / 8, -np.sqrt(2))])
def test_closed_form_derivative(phi, expected):
    program = single_rotation()
    params = program.with_free_params(np.zeros(program.param_shape), [phi])
    g = shift_rule_grad(program, params, [0.0], 0)
    assert g.shape == (1,)
    assert g[0] == pytest.approx(expected, abs=1e-14)


def test_phase_parameters_on_zero_state_have_zero_gradient():
    program = build(AnsatzSpec(SQ, 1, 1))
    params = np.array([[[0.7, -0.4, 0.0]]])
    g = shift_rule_grad(program, params, [0.0, 0.0, 0.0], 0)
    assert np.abs(g[:2]).max() < 1e-15


def test_last_phase_before_measurement_has_zero_gradient():
    # pure phase adjacent to a computational-basis measurement
    program = build(AnsatzSpec(SQ, 2, 1))
    rng = np.random.default_rng(0)
    params = rng.uniform(0, 2 * np.pi, program.param_shape)
    g = shift_rule_grad(program, params, rng.uniform(0, np.pi, 3), 0)
    assert np.abs(g[3:5]).max() < 1e-15


def test_observable_out_of_range():
    program = build(AnsatzSpec(SE, 1, 3))
    with pytest.raises(ValueError):
        shift_rule_grad(program, np.zeros(program.param_shape), np.zeros(3), 3)


@pytest.mark.parametrize("h", [1e-8, 1e-2])
def test_fd_step_range(h):
    program = single_rotation()
    with pytest.raises(ValueError):
        finite_diff_grad(program, np.zeros(program.param_shape), [0.0], 0, h)


def test_zero_parameter_program_gives_empty_gradient():
    program = single_rotation()
    program = type(program)(program.spec, program.instructions, np.zeros(program.param_shape, bool))
    assert finite_diff_grad(program, np.zeros(program.param_shape), [0.0]).shape == (0,)
    assert shift_rule_grad(program, np.zeros(program.param_shape), [0.0]).shape == (0,)


def test_structural_zeros_excluded():
    program = build(AnsatzSpec(RA, 2, 3))
    params = init_params(program, np.random.default_rng(1))
    assert shift_rule_grad(program, params, np.ones(3)).shape == (6,)
    assert finite_diff_grad(program, params, np.ones(3)).shape == (6,)


def test_strong_entangling_agrees_with_fd_100_instances():
    program = build(AnsatzSpec(SE, 3, 3))
    rng = np.random.default_rng(2)
    for _ in range(100):
        params = init_params(program, rng)
        features = rng.uniform(0, np.pi, 3)
        for obs in range(3):
            a = shift_rule_grad(program, params, features, obs)
            b = finite_diff_grad(program, params, features, obs, 1e-5)
            assert np.linalg.norm(a - b) <= 1e-6 * np.linalg.norm(a)


def five_point(program, params, features, obs, h=1e-3):
    """Fourth-order stencil; truncation error ~h^4, far below the central difference."""
    out = []
    for idx in program.free_indices:
        vals = []
        for k in (-2, -1, 1, 2):
            p = params.copy().reshape(-1)
            p[idx] += k * h
            vals.append(forward(program, p.reshape(params.shape), features)[obs])
        out.append((vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h))
    return np.array(out)


def _elementwise_sweep(rng):
    worst = []
    for family in (RA, SE):
        for reup in (False, True):
            for q in (1, 3):
                for layers in (1, 2, 3):
                    program = build(AnsatzSpec(family, layers, q, reup))
                    for _ in range(100):
                        params = init_params(program, rng)
                        features = rng.uniform(0, np.pi, q)
                        jac = shift_rule_jacobian(program, params, features)
                        for obs in range(q):
                            a, b = jac[:, obs], finite_diff_grad(program, params, features, obs)
                            for i in np.flatnonzero(np.abs(a) > 1e-8):
                                worst.append((abs(a[i] - b[i]) / abs(a[i]), program, params, features, obs, i))
    return worst


@pytest.mark.xfail(strict=True, reason="central differences at h=1e-5 carry ~1e-10 absolute "
                   "truncation error, so components with |grad| < 1e-4 cannot reach 1e-6 relative")
def test_elementwise_relative_error_all_families():
    worst = _elementwise_sweep(np.random.default_rng(3))
    assert max(w[0] for w in worst) <= 1e-6


def test_elementwise_outliers_are_oracle_noise():
    # every component that misses 1e-6 against central differences agrees with
    # a fourth-order stencil, so the shift rule is not the source of the gap
    outliers = [w for w in _elementwise_sweep(np.random.default_rng(3)) if w[0] > 1e-6]
    for _, program, params, features, obs, i in outliers:
        a = shift_rule_grad(program, params, features, obs)[i]
        ref = five_point(program, params, features, obs)[i]
        assert abs(a - ref) <= 1e-6 * abs(a)


def test_gradient_periodic():
    program = build(AnsatzSpec(SE, 2, 3))
    rng = np.random.default_rng(4)
    params = init_params(program, rng)
    f = rng.uniform(0, np.pi, 3)
    np.testing.assert_allclose(shift_rule_jacobian(program, params + 2 * np.pi, f),
                               shift_rule_jacobian(program, params, f), atol=1e-12)


def test_feature_jacobian_matches_fd():
    program = build(AnsatzSpec(SE, 2, 3, True))
    rng = np.random.default_rng(5)
    params = init_params(program, rng)
    f = rng.uniform(0, np.pi, 3)
    jac = feature_jacobian(program, params, f)
    h = 1e-6
    for j in range(3):
        e = np.eye(3)[j] * h
        fd = (forward(program, params, f + e) - forward(program, params, f - e)) / (2 * h)
        np.testing.assert_allclose(jac[j], fd, atol=1e-8)


def test_batched_jacobian_matches_single():
    program = build(AnsatzSpec(RA, 2, 3))
    rng = np.random.default_rng(6)
    params = init_params(program, rng)
    feats = rng.uniform(0, np.pi, (4, 3))
    jac = shift_rule_jacobian(program, params, feats)
    for f, j in zip(feats, jac):
        np.testing.assert_allclose(shift_rule_jacobian(program, params, f), j, atol=1e-14)


# --- full-model gradient ---

def loss_of(model, batch):
    p = model.probabilities(batch.features)
    return -np.mean(np.log(p[np.arange(len(batch)), batch.labels]))


def fd_model(model, batch, h=1e-6):
    """Central differences over every trainable array of the model."""
    program = model.program
    theta = program.free_params(model.params)

    def with_theta(t):
        return HybridModel(model.spec, program, program.with_free_params(model.params, t),
                           model.head, model.adapter, model.scaler)

    def grad_of(values, rebuild):
        g = np.zeros_like(values)
        for idx in np.ndindex(values.shape):
            up, down = values.copy(), values.copy()
            up[idx] += h
            down[idx] -= h
            g[idx] = (loss_of(rebuild(up), batch) - loss_of(rebuild(down), batch)) / (2 * h)
        return g

    head = model.head
    out = {
        "quantum": grad_of(theta, with_theta),
        "head_weights": grad_of(head.weights, lambda w: HybridModel(
            model.spec, program, model.params, ClassicalHead(w, head.biases), model.adapter, model.scaler)),
        "head_biases": grad_of(head.biases, lambda b: HybridModel(
            model.spec, program, model.params, ClassicalHead(head.weights, b), model.adapter, model.scaler)),
    }
    if model.adapter is not None:
        a = model.adapter
        out["adapter_weights"] = grad_of(a.weights, lambda w: HybridModel(
            model.spec, program, model.params, head, Adapter(w, a.biases), model.scaler))
        out["adapter_biases"] = grad_of(a.biases, lambda b: HybridModel(
            model.spec, program, model.params, head, Adapter(a.weights, b), model.scaler))
    return out


def make_batch(rng, n, dim, classes):
    return Dataset(rng.uniform(0, np.pi / 2, (n, dim)), rng.integers(0, classes, n), classes)


@pytest.mark.parametrize("input_dim", [3, 5])
def test_model_grad_matches_full_model_fd(input_dim):
    rng = np.random.default_rng(7)
    model = init_model(AnsatzSpec(SE, 2, 3, True), 3, seed=1, input_dim=input_dim)
    # larger head weights so the quantum gradient is not tiny
    model = HybridModel(model.spec, model.program, model.params,
                        ClassicalHead(rng.normal(size=(3, 3)), rng.normal(size=3)), model.adapter)
    batch = make_batch(rng, 5, input_dim, 3)
    g = model_grad(model, batch)
    assert g.loss == pytest.approx(loss_of(model, batch), abs=1e-12)
    ref = fd_model(model, batch)
    for name, expected in ref.items():
        got = getattr(g, name)
        assert np.linalg.norm(got - expected) <= 1e-5 * np.linalg.norm(expected), name


def test_zero_head_gives_zero_quantum_gradient():
    model = init_model(AnsatzSpec(SE, 2, 3), 2, seed=0)
    model = HybridModel(model.spec, model.program, model.params, ClassicalHead(np.zeros((2, 3)), np.zeros(2)))
    g = model_grad(model, make_batch(np.random.default_rng(8), 6, 3, 2))
    assert not g.quantum.any()


def test_uniform_probabilities_bias_gradient():
    model = init_model(AnsatzSpec(SE, 1, 3), 3, seed=0)
    model = HybridModel(model.spec, model.program, model.params, ClassicalHead(np.zeros((3, 3)), np.zeros(3)))
    batch = Dataset(np.array([[0.1, 0.2, 0.3]]), np.array([2]), 3)
    g = model_grad(model, batch)
    np.testing.assert_allclose(g.head_biases, np.array([1, 1, 1]) / 3 - np.array([0, 0, 1]), atol=1e-15)


def test_empty_batch_rejected():
    model = init_model(AnsatzSpec(SE, 1, 3), 2)
    with pytest.raises(ValueError):
        model_grad(model, Dataset(np.zeros((0, 3)), np.zeros(0, int), 2))
