import io
import json
import math

import numpy as np
import pytest

from dprank.errors import InvalidInputError, InvalidParameterError
from dprank.vecagg import (
    LocalProtocol,
    aggregate_gaussian,
    aggregate_laplace,
    aggregate_local,
    clip_to_norm,
    gaussian_mean_sigma,
    ldp_analyze,
    ldp_randomize,
    local_laplace_scale,
    sphere_radius,
)


def test_noise_disabled_returns_exact_mean(noiseless):
    v = np.random.default_rng(0).normal(size=(20, 5))
    v1 = clip_to_norm(v, 3.0, 1)
    assert np.array_equal(aggregate_laplace(v1, 3.0, 1.0, np.random.default_rng(0)), v1.mean(axis=0))
    v2 = clip_to_norm(v, 3.0, 2)
    assert np.array_equal(aggregate_gaussian(v2, 3.0, 1.0, np.random.default_rng(0)), v2.mean(axis=0))
    assert np.allclose(aggregate_local(v2, 3.0, 1.0, seed=1), v2.mean(axis=0))


def test_laplace_scale_single_vector():
    rng = np.random.default_rng(1)
    draws = np.array([aggregate_laplace(np.zeros((1, 2)), 1.5, 0.5, rng) for _ in range(10_000)])
    # maximum likelihood scale of a centred Laplace is the mean absolute value
    assert np.abs(draws).mean() == pytest.approx(2 * 1.5 / 0.5, rel=0.03)


def test_gaussian_sigma_closed_form():
    assert gaussian_mean_sigma(1.0, 10, 0.5) == pytest.approx(0.2)
    rng = np.random.default_rng(2)
    draws = np.array([aggregate_gaussian(np.zeros((10, 1)), 1.0, 0.5, rng)[0] for _ in range(10_000)])
    assert draws.std() == pytest.approx(0.2, rel=0.05)


def test_gaussian_max_error_grows_like_sqrt_log_d():
    rng = np.random.default_rng(3)
    small = np.mean([np.abs(aggregate_gaussian(np.zeros((1, 16)), 1.0, 0.5, rng)).max() for _ in range(2000)])
    large = np.mean([np.abs(aggregate_gaussian(np.zeros((1, 4096)), 1.0, 0.5, rng)).max() for _ in range(300)])
    predicted = math.sqrt(math.log(4096) / math.log(16))
    assert predicted / 1.3 <= large / small <= predicted * 1.3


def test_parameter_errors():
    with pytest.raises(InvalidParameterError):
        aggregate_laplace(np.zeros((1, 2)), 1.0, 0.0, np.random.default_rng(0))
    with pytest.raises(InvalidParameterError):
        aggregate_gaussian(np.zeros((1, 2)), 1.0, -1.0, np.random.default_rng(0))
    with pytest.raises(InvalidInputError):
        ldp_analyze(np.zeros((0, 3)))


def test_norm_violations_are_rescaled(caplog):
    with caplog.at_level("WARNING"):
        out = clip_to_norm(np.array([[3.0, 4.0], [0.3, 0.4]]), 1.0, 2)
    assert "exceed" in caplog.text
    assert np.allclose(out, [[0.6, 0.8], [0.3, 0.4]])


def test_neighbor_sensitivity():
    rng = np.random.default_rng(4)
    for p, bound in ((1, 2.0), (2, 2.0)):
        for _ in range(100):
            v = clip_to_norm(rng.normal(size=(15, 6)), bound, p)
            w = v.copy()
            w[rng.integers(15)] = clip_to_norm(rng.normal(size=(1, 6)) * 5, bound, p)[0]
            assert np.linalg.norm(v.mean(0) - w.mean(0), ord=p) <= 2 * bound / 15 + 1e-12


@pytest.mark.parametrize("mechanism", ["laplace", "sphere"])
def test_local_randomizers_unbiased(mechanism):
    rng = np.random.default_rng(5)
    v = np.array([0.3, -0.2, 0.1, 0.0, 0.5, -0.4, 0.2, 0.1])
    v = v / np.linalg.norm(v) * 0.9
    reports = ldp_randomize(np.tile(v, (10_000, 1)), 1.0, 1.0, rng, mechanism)
    se = reports.std(axis=0) / math.sqrt(len(reports))
    assert np.all(np.abs(reports.mean(axis=0) - v) <= 4 * se)


def test_local_zero_vector_mean():
    rng = np.random.default_rng(6)
    reports = ldp_randomize(np.zeros((100_000, 3)), 1.0, 1.0, rng)
    se = reports.std(axis=0) / math.sqrt(len(reports))
    assert np.all(np.abs(reports.mean(axis=0)) <= 3 * se)


def test_local_laplace_density_ratio():
    # l1 distance between any two inputs with l2 norm <= C is <= 2 sqrt(d) C
    d, bound, eps = 5, 1.0, 1.0
    rng = np.random.default_rng(7)
    scale = local_laplace_scale(bound, d, eps)
    for _ in range(200):
        a, b = (clip_to_norm(rng.normal(size=(1, d)), bound, 2)[0] for _ in range(2))
        z = rng.normal(size=d) * 3
        log_ratio = (np.abs(z - b).sum() - np.abs(z - a).sum()) / scale
        assert log_ratio <= eps + 1e-12


def test_sphere_radius_properties():
    # for d = 1 the message is +-radius and the mean is C * tanh(eps/2) * radius / C
    assert sphere_radius(1.0, 1, 1.0) == pytest.approx((math.e + 1) / (math.e - 1))
    assert sphere_radius(1.0, 64, 1.0) > sphere_radius(1.0, 4, 1.0)


def test_local_error_band_and_scaling():
    d, bound, eps = 8, 1.0, 1.0
    v = np.full(d, 0.2)

    def err(n, seed):
        return np.abs(aggregate_local(np.tile(v, (n, 1)), bound, eps, seed=seed) - v).max()

    e1 = np.mean([err(5000, s) for s in range(50)])
    e2 = np.mean([err(10_000, 100 + s) for s in range(50)])
    assert 1.2 <= e1 / e2 <= 1.7
    band = local_laplace_scale(bound, d, eps) * math.sqrt(2) / math.sqrt(10_000)
    assert e2 <= 4 * band


def test_ldp_analyze_examples():
    u = np.array([1.0, -2.0])
    assert np.array_equal(ldp_analyze([u, u, u]), u)
    assert np.array_equal(ldp_analyze([u, -u]), [0.0, 0.0])


def test_protocol_message_log():
    log = io.StringIO()
    proto = LocalProtocol(1.0, 1.0, seed=9, message_log=log)
    proto.submit(np.zeros((3, 2)))
    lines = [json.loads(x) for x in log.getvalue().splitlines()]
    assert [x["user"] for x in lines] == [0, 1, 2]
    assert lines[1]["seed"] == [9, 1, 1]
    again = LocalProtocol(1.0, 1.0, seed=9, per_user_seeds=True)
    again.submit(np.zeros((3, 2)))
    assert np.allclose(again.estimate(), np.mean([x["message"] for x in lines], axis=0))
    with pytest.raises(InvalidParameterError):
        LocalProtocol(1.0, 1.0, per_user_seeds=True)
