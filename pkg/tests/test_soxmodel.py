import itertools

import numpy as np
import pytest

from socausal.domains import TruncationSpec, ValueDomain, build_grid
from socausal.soxmodel import (
    JointModel,
    PartitionError,
    SecondOrderConditional,
    binary_tanh_parameters,
    exponent,
    joint_log_density,
    log_density,
    log_partition,
    model_from_json,
    model_to_json,
    moments,
    node_probabilities,
    sample,
)

BIN = ValueDomain.binary()
GB = build_grid(BIN)


def binary_kernel(a=0.0, b=0.0, child=0, parents=(), couplings=()):
    return SecondOrderConditional(child, tuple(parents), [a], [[b]],
                                  {i: [[c]] for i, c in zip(parents, couplings)}, BIN, GB)


def gaussian_kernel(nu, sd, resolution=512, sigmas=8):
    dom = ValueDomain.full_real()
    g = build_grid(dom, resolution, TruncationSpec(nu, sigmas * sd))
    return SecondOrderConditional(0, (), [nu / sd ** 2], [[-0.5 / sd ** 2]], {}, dom, g)


def test_exponent_examples():
    assert exponent(binary_kernel(), [1.0]) == 0.0
    assert exponent(binary_kernel(), [0.0]) == 0.0
    assert exponent(binary_kernel(0.7, -0.2), [1.0]) == pytest.approx(0.5)
    k = binary_kernel(0.7, -0.2, child=1, parents=(0,), couplings=(1.3,))
    assert exponent(k, [1.0], [[1.0]]) == pytest.approx(1.8)


def test_exponent_dimension_mismatch():
    with pytest.raises(ValueError):
        exponent(binary_kernel(), [1.0, 0.0])
    k = binary_kernel(child=1, parents=(0,), couplings=(1.0,))
    with pytest.raises(ValueError):
        exponent(k, [1.0], [])


def test_beta_self_symmetrized():
    dom = ValueDomain.circle()
    k = SecondOrderConditional(0, (), [0, 0], [[1.0, 2.0], [0.0, -1.0]], {}, dom, build_grid(dom, 64))
    assert np.max(np.abs(k.beta_self - k.beta_self.T)) < 1e-12
    assert k.beta_self[0, 1] == 1.0


def test_log_partition_examples(oracle):
    assert log_partition(binary_kernel(2.5)) == pytest.approx(np.log1p(np.exp(2.5)), abs=1e-14)
    dom = ValueDomain.circle()
    k = SecondOrderConditional(0, (), [0, 0], np.zeros((2, 2)), {}, dom, build_grid(dom, 100))
    assert abs(log_partition(k) - oracle["log_2pi"]) < 1e-9
    assert abs(log_partition(gaussian_kernel(0.0, 1.0)) - oracle["log_sqrt_2pi"]) < 1e-6


def test_log_partition_overflow_names_kernel():
    # finite parameters whose exponent overflows even after max shifting
    k = binary_kernel(1e308, 0.0, child=1, parents=(0,), couplings=(1e308,))
    with pytest.raises(PartitionError, match="p\\(x1\\|x0\\)"):
        log_partition(k, [[1.0]])


def test_log_density_examples(oracle):
    k = binary_kernel()
    assert log_density(k, [0]) == pytest.approx(-oracle["log2"])
    assert log_density(k, [1]) == pytest.approx(-oracle["log2"])
    assert abs(log_density(gaussian_kernel(0.0, 1.0), [0.0]) + oracle["log_sqrt_2pi"]) < 1e-6


def _random_kernel(rng, dom, trunc=None, n_parents=0):
    g = build_grid(dom, 128, trunc)
    d = dom.dimension
    a = rng.uniform(-1, 1, d)
    a *= min(1.0, 3 / np.linalg.norm(a))
    b = rng.uniform(-1, 1, (d, d))
    b *= min(1.0, 3 / np.linalg.norm(b))
    if dom.is_unbounded:
        b = -np.abs(b) - np.eye(d) * 0.1
    couplings = {i + 1: rng.uniform(-1, 1, (d, 1)) for i in range(n_parents)}
    return SecondOrderConditional(0, tuple(couplings), a, b, couplings, dom, g)


@pytest.mark.parametrize("dom,trunc", [
    (ValueDomain.binary(), None),
    (ValueDomain.finite([-1.0, 0.5, 2.0]), None),
    (ValueDomain.integer_range(0, 5), None),
    (ValueDomain.interval(-1, 1), None),
    (ValueDomain.positive_real(), TruncationSpec(1.0, 8.0)),
    (ValueDomain.full_real(), TruncationSpec(0.0, 10.0)),
    (ValueDomain.circle(), None),
])
def test_normalization_random_parameters(dom, trunc):
    rng = np.random.default_rng(3)
    for _ in range(100):
        k = _random_kernel(rng, dom, trunc, n_parents=2)
        pv = [rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)]
        p = node_probabilities(k, pv)
        assert abs(p.sum() - 1.0) < 1e-9
        z = log_partition(k, pv)
        dens = np.exp(k.scores(pv)[0] - z)
        assert abs(k.grid.weights @ dens - 1.0) < 1e-9


def test_gradient_identity_finite_differences():
    rng = np.random.default_rng(5)
    dom = ValueDomain.circle()
    g = build_grid(dom, 200)
    for _ in range(5):
        a = rng.uniform(-1, 1, 2)
        b = rng.uniform(-1, 1, (2, 2))
        b = b + b.T
        mean, second, _ = moments(SecondOrderConditional(0, (), a, b, {}, dom, g))
        h = 1e-5
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            zp = log_partition(SecondOrderConditional(0, (), a + e, b, {}, dom, g))
            zm = log_partition(SecondOrderConditional(0, (), a - e, b, {}, dom, g))
            fd = (zp - zm) / (2 * h)
            assert abs(fd - mean[i]) <= 1e-5 * max(1.0, abs(mean[i]))
        for i, j in itertools.product(range(2), repeat=2):
            e = np.zeros((2, 2))
            e[i, j] = h
            zp = log_partition(SecondOrderConditional(0, (), a, b + e, {}, dom, g))
            zm = log_partition(SecondOrderConditional(0, (), a, b - e, {}, dom, g))
            fd = (zp - zm) / (2 * h)
            assert abs(fd - second[i, j]) <= 1e-5 * max(1.0, abs(second[i, j]))


def test_moments_examples():
    assert moments(binary_kernel())[0][0] == pytest.approx(0.5)
    mean, second, _ = moments(gaussian_kernel(1.3, 0.7))
    assert abs(mean[0] - 1.3) < 1e-6
    assert abs(second[0, 0] - (0.49 + 1.69)) < 1e-6
    dom = ValueDomain.finite([-1, 1])
    k = SecondOrderConditional(0, (), [0], [[0]], {}, dom, build_grid(dom))
    mean, second, _ = moments(k)
    assert mean[0] == pytest.approx(0.0) and second[0, 0] == pytest.approx(1.0)


def test_moments_cross_terms():
    k = binary_kernel(0.3, 0.0, child=1, parents=(0,), couplings=(0.9,))
    mean, _, cross = moments(k, [[1.0]])
    assert cross[0][0, 0] == pytest.approx(mean[0])


def test_sample_examples():
    rng = np.random.default_rng(0)
    draws = sample(binary_kernel(50.0), [], rng, size=10_000)
    assert np.mean(draws == 1) > 0.999
    draws = sample(binary_kernel(), [], np.random.default_rng(1), size=10_000)
    assert 0.48 <= np.mean(draws) <= 0.52
    nu, sd = 0.4, 1.5
    draws = sample(gaussian_kernel(nu, sd), [], np.random.default_rng(2), size=10_000)
    assert abs(draws.mean() - nu) < 3 * sd / 100
    a = sample(binary_kernel(0.2), [], np.random.default_rng(9), size=50)
    b = sample(binary_kernel(0.2), [], np.random.default_rng(9), size=50)
    np.testing.assert_array_equal(a, b)


def test_joint_log_density_examples(oracle):
    m = JointModel((0, 1), (binary_kernel(child=0), binary_kernel(child=1, parents=(0,), couplings=(0.0,))))
    assert joint_log_density(m, [[1.0], [0.0]]) == pytest.approx(-2 * oracle["log2"])
    k0 = binary_kernel(0.4, 0.1, child=0)
    k1 = binary_kernel(-0.3, 0.2, child=1, parents=(0,), couplings=(1.1,))
    m = JointModel((0, 1), (k0, k1))
    table = {}
    for x0, x1 in itertools.product((0, 1), repeat=2):
        table[(x0, x1)] = np.exp(0.5 * x0) * np.exp((-0.1 + 1.1 * x0) * x1)
    zs = {x0: sum(np.exp((-0.1 + 1.1 * x0) * x1) for x1 in (0, 1)) for x0 in (0, 1)}
    z0 = 1 + np.exp(0.5)
    for (x0, x1), v in table.items():
        brute = np.log(v / (z0 * zs[x0]))
        assert abs(joint_log_density(m, [[x0], [x1]]) - brute) < 1e-12
        assert joint_log_density(m, [[x0], [x1]]) == pytest.approx(
            log_density(k0, [x0]) + log_density(k1, [x1], [[x0]]))


def test_joint_model_validates_parents():
    with pytest.raises(ValueError):
        JointModel((0, 1), (binary_kernel(child=0), binary_kernel(child=1)))
    with pytest.raises(ValueError):
        JointModel((0, 0), (binary_kernel(child=0), binary_kernel(child=0)))


def test_tanh_mapping_single_case():
    k = binary_kernel(0.8, -0.4, child=2, parents=(0, 1), couplings=(1.0, -2.0))
    lam0, lam = binary_tanh_parameters(k)
    for bits in itertools.product((0, 1), repeat=2):
        p = node_probabilities(k, [[bits[0]], [bits[1]]])[0, 1]
        q = 0.5 * (1 + np.tanh(lam0 + lam[0] * bits[0] + lam[1] * bits[1]))
        assert abs(p - q) < 1e-12


def test_json_roundtrip():
    k0 = gaussian_kernel(0.2, 1.1)
    dom = ValueDomain.circle()
    k1 = SecondOrderConditional(1, (0,), [0.1, -0.2], [[0.3, 0.1], [0.1, -0.3]], {0: [[0.5], [0.2]]},
                                dom, build_grid(dom, 64))
    m = JointModel((0, 1), (k0, k1))
    m2 = model_from_json(model_to_json(m))
    assert model_to_json(m2) == model_to_json(m)
    row = [[0.3], [0.0, 1.0]]
    assert joint_log_density(m2, row) == joint_log_density(m, row)
