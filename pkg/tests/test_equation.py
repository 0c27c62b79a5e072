import json
from importlib import resources

import numpy as np
import pytest

from minkmembrane.equation import (
    DerivativeBundle,
    Formulation,
    box_operator,
    capital_f,
    principal_coefficients,
    q00,
    qij,
    random_bundle,
    residual,
    residual_divergence,
    residual_geometric,
    residual_nullform,
)
from minkmembrane.errors import NonHyperbolicError
from minkmembrane.fields import GridSpec


def _constant_bundle(grid, dt, grads, second):
    full = lambda v: np.full(grid.size, float(v))
    n = grid.dimension
    sec = {k: full(second.get(k, 0.0)) for a in range(n + 1) for b in range(a, n + 1) for k in [(a, b)]}
    return DerivativeBundle(grid, full(0.0), full(dt), [full(g) for g in grads], sec)


def _fixture():
    path = resources.files("minkmembrane") / "fixtures" / "formulation.json"
    return json.loads(path.read_text())


def test_frozen_residual_point():
    fx = _fixture()["residual_point"]
    g = GridSpec(1, 1.0, 5)
    # phi = t^2/10 evaluated at (t, x) = (2, 0)
    b = _constant_bundle(g, dt=0.4, grads=[0.0], second={(0, 0): 0.2})
    assert q00(b, b)[0] == pytest.approx(fx["q00"], abs=1e-15)
    assert residual_nullform(b)[0] == pytest.approx(fx["nullform"], rel=1e-14)
    assert residual_geometric(b)[0] == pytest.approx(fx["geometric"], rel=1e-14)
    assert residual_divergence(b)[0] == pytest.approx(fx["geometric"], rel=1e-14)


@pytest.mark.parametrize("dimension", [1, 2])
def test_formulations_agree_on_random_bundles(dimension, rng):
    g = GridSpec(dimension, 1.0, 7)
    for _ in range(20):
        b = random_bundle(g, rng, q_cap=0.5)
        q = q00(b, b)
        geo = residual_geometric(b)
        nul = residual_nullform(b)
        div = residual_divergence(b)
        scale = np.max(np.abs(geo)) + np.max(np.abs(nul)) + 1e-300
        assert np.max(np.abs(geo - nul / np.sqrt(1.0 - q))) <= 1e-10 * scale
        assert np.max(np.abs(div - geo)) <= 1e-10 * scale


def test_residual_dispatch(rng):
    g = GridSpec(1, 1.0, 7)
    b = random_bundle(g, rng)
    assert np.array_equal(residual(b, Formulation.GEOMETRIC), residual_geometric(b))
    assert np.array_equal(residual(b, Formulation.NULLFORM), residual_nullform(b))
    assert np.array_equal(residual(b, Formulation.DIVERGENCE), residual_divergence(b))


def test_principal_coefficients_contract_to_nullform_residual(rng):
    g = GridSpec(2, 1.0, 7)
    for _ in range(10):
        b = random_bundle(g, rng, q_cap=0.5)
        h = principal_coefficients(b)
        n = g.dimension
        contracted = np.zeros(g.size)
        for a in range(n + 1):
            for c in range(n + 1):
                contracted += h[a, c] * b.d2(a, c)
        nul = residual_nullform(b)
        assert np.max(np.abs(contracted - nul)) <= 1e-10 * (np.max(np.abs(nul)) + 1.0)
        # time-time coefficient stays bounded away from zero below the q cap
        assert np.all(h[0, 0] >= 1.0)


def test_capital_f_values_and_failure():
    assert capital_f(np.array([0.0]))[0] == pytest.approx(0.0)
    assert capital_f(np.array([0.75]))[0] == pytest.approx(1.0)
    with pytest.raises(NonHyperbolicError) as exc:
        capital_f(np.array([0.2, 1.5]))
    assert exc.value.node == 1
    assert exc.value.q_value == pytest.approx(1.5)


def test_residual_rejects_degenerate_metric():
    g = GridSpec(1, 1.0, 5)
    b = _constant_bundle(g, dt=1.2, grads=[0.0], second={(0, 0): 0.1})
    with pytest.raises(NonHyperbolicError):
        residual_nullform(b)
    with pytest.raises(NonHyperbolicError):
        principal_coefficients(b, q_max=0.9)


def test_qij_antisymmetric_and_guarded(rng):
    g = GridSpec(2, 1.0, 7)
    u = random_bundle(g, rng)
    v = random_bundle(g, rng)
    assert np.allclose(qij(u, v, 0, 2), qij(v, u, 2, 0))
    assert np.allclose(qij(u, v, 1, 2), -qij(u, v, 2, 1))
    with pytest.raises(ValueError):
        qij(u, v, 1, 1)


def test_random_bundle_respects_cap(rng):
    g = GridSpec(2, 1.0, 9)
    for _ in range(10):
        b = random_bundle(g, rng, q_cap=0.3)
        assert np.max(np.abs(q00(b, b))) < 0.3


def test_box_operator_sign_convention():
    g = GridSpec(1, 1.0, 5)
    b = _constant_bundle(g, dt=0.0, grads=[0.0], second={(0, 0): 2.0, (1, 1): 0.5})
    assert box_operator(b)[0] == pytest.approx(1.5)
