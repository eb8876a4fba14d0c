import numpy as np
import pytest

from cases import random_case
from oracles import numeric_hessian, numeric_score, quadratic_vol, step_logpdf
from pwgreeks import (
    InvalidInputError,
    build_grid,
    diagonal_kernel,
    flat_model,
    generate_block,
    generic_weights,
    uniform_correlation,
)
from pwgreeks.errors import SingularCorrelationError
from pwgreeks.market import c_functions
from pwgreeks.weights import (
    JDerivatives,
    check_symmetric,
    delta_weights,
    diagonal_j_callback,
    diagonal_weights,
    gamma_weights,
    r_bundle,
)

jax_oracle = pytest.importorskip("jax_oracle")


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


def test_bs_closed_forms(bs_spec):
    k = diagonal_kernel(bs_spec)
    z = np.array([[0.7], [-1.3], [0.0]])
    ws = diagonal_weights(k, z, np.sqrt(bs_spec.grid.dt1) * z)
    np.testing.assert_array_equal(ws.theta0, 0.0)
    np.testing.assert_allclose(ws.theta1, z / 0.2, rtol=1e-14)
    np.testing.assert_allclose(ws.lambda2[:, 0, 0], (z[:, 0] ** 2 - 1) / 0.04, rtol=1e-13)
    assert ws.lambda2[2, 0, 0] == pytest.approx(-1 / 0.04)
    np.testing.assert_allclose(ws.lambda0, 0.0, atol=1e-15)


def test_r_bundle_constant_vol():
    c = c_functions(0.25, 0.0, 0.0, 2.0, 1 / 360)
    rb = r_bundle(c, np.array([0.3]))
    assert rb.r[0] == pytest.approx(1 / 0.5)
    assert rb.ds_r[0] == pytest.approx(-1 / (4 * 0.25))
    for arr in (rb.dw_r, rb.dww_r, rb.dsw_r):
        np.testing.assert_array_equal(arr, 0.0)
    rb0 = r_bundle(c_functions(0.2, 0.1, 0.3, 1.0, 1 / 360), np.zeros(1))
    assert rb0.r[0] == c_functions(0.2, 0.1, 0.3, 1.0, 1 / 360).c2


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_parity_and_symmetry(rng, n):
    for _ in range(25):
        spec, z, x = random_case(rng, n)
        k = diagonal_kernel(spec)
        ws, neg = diagonal_weights(k, z, x), diagonal_weights(k, -z, x)
        np.testing.assert_allclose(neg.theta1, -ws.theta1, rtol=1e-15)
        np.testing.assert_allclose(neg.lambda2, ws.lambda2, rtol=1e-15)
        for lam in (ws.lambda0, ws.lambda1, ws.lambda2):
            assert _rel(lam, np.swapaxes(lam, -1, -2)) <= 1e-10
        zero = diagonal_weights(k, np.zeros(n), x)
        np.testing.assert_array_equal(zero.theta1, 0.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_generic_matches_diagonal(rng, n):
    for _ in range(25):
        spec, z, x = random_case(rng, n)
        k = diagonal_kernel(spec)
        d = diagonal_weights(k, z, x)
        g = generic_weights(diagonal_j_callback(k), spec.spot, z, x)
        for name in ("theta0", "theta1", "lambda0", "lambda1", "lambda2"):
            assert _rel(getattr(g, name), getattr(d, name)) <= 1e-12, name


@pytest.mark.parametrize("n", [1, 2, 3])
def test_autodiff_oracle(rng, n):
    """Weights from jax derivatives of the first step agree with the closed forms."""
    for _ in range(5):
        spec, z, x = random_case(rng, n)
        surf = spec.surfaces
        h0 = jax_oracle.make_h0(
            [s.atm[0] for s in surf], [s.skew[0] for s in surf], [s.kurt[0] for s in surf],
            [s.s_ref for s in surf], spec.corr.rho, spec.grid.dt1,
        )
        g = generic_weights(jax_oracle.j_callback_from_h0(h0), spec.spot, z, x)
        d = diagonal_weights(diagonal_kernel(spec), z, x)
        for name in ("theta0", "theta1", "lambda0", "lambda1", "lambda2"):
            assert _rel(getattr(g, name), getattr(d, name)) <= 1e-9, name


def test_generic_constant_j():
    n = 2
    j = np.array([[2.0, 0.5], [0.1, 3.0]])

    def cb(s, x):
        return JDerivatives(j, np.zeros((n,) * 3), np.zeros((n,) * 3), np.zeros((n,) * 4), np.zeros((n,) * 4))

    ws = generic_weights(cb, np.ones(n), np.array([0.3, -1.0]), np.zeros(n))
    np.testing.assert_array_equal(ws.theta0, 0.0)
    np.testing.assert_array_equal(ws.lambda0, 0.0)
    with pytest.raises(InvalidInputError):
        generic_weights(cb, np.ones(n), np.zeros(3), np.zeros(n))


@pytest.mark.parametrize("dt1", [1 / 360, 1 / 12])
@pytest.mark.parametrize("z", [-1.7, 0.0, 0.4, 2.2])
def test_delta_weight_is_transition_score(rng, dt1, z):
    spec, _, _ = random_case(rng, 1, dt1=dt1)
    surf = spec.surfaces[0]
    vol = quadratic_vol(surf.atm, surf.skew, surf.kurt, surf.s_ref)
    k = diagonal_kernel(spec)
    zv = np.array([z])
    s1 = spec.spot * np.exp(-0.5 * vol(spec.spot) ** 2 * dt1 + vol(spec.spot) * np.sqrt(dt1) * zv)
    ws = diagonal_weights(k, zv, np.sqrt(dt1) * zv)
    score = numeric_score(lambda s: step_logpdf(s, s1, vol, [[1.0]], dt1), spec.spot, h=1e-6)
    assert ws.delta_weight(dt1)[0] == pytest.approx(score[0], rel=1e-4, abs=1e-6)


def test_delta_weight_at_median_matches_analytic_score(bs_spec):
    from oracles import lognormal_score

    dt1 = bs_spec.grid.dt1
    k = diagonal_kernel(bs_spec)
    for z in (0.0, 1.1):
        s1 = np.exp(-0.5 * 0.04 * dt1 + 0.2 * np.sqrt(dt1) * z)
        w = diagonal_weights(k, np.array([z]), np.sqrt(dt1) * np.array([z])).delta_weight(dt1)[0]
        assert w == pytest.approx(lognormal_score(1.0, s1, 0.2, dt1), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_weights_are_density_derivatives(rng, n):
    """Delta weight = grad log p, Gamma weight = p_ss / p for the one-step density."""
    dt1 = 1 / 12
    for _ in range(4):
        spec, z, _ = random_case(rng, n, dt1=dt1)
        surf = spec.surfaces
        vol = quadratic_vol(
            [s.atm[0] for s in surf], [s.skew[0] for s in surf], [s.kurt[0] for s in surf], [s.s_ref for s in surf]
        )
        sig = vol(spec.spot)
        x = np.sqrt(dt1) * z
        s1 = spec.spot * np.exp(-0.5 * sig**2 * dt1 + sig * (spec.corr.rho @ x))
        corr = spec.corr.sigma_mat

        def logp(s):
            return step_logpdf(s, s1, vol, corr, dt1)

        g = numeric_score(logp, spec.spot)
        hess = numeric_hessian(logp, spec.spot)
        ws = diagonal_weights(diagonal_kernel(spec), z, x)
        np.testing.assert_allclose(ws.delta_weight(dt1), g, rtol=1e-5, atol=1e-6)
        target = hess + np.outer(g, g)
        assert _rel(ws.gamma_weight(dt1), target) <= 1e-4


def test_zero_expectation_identities():
    grid = build_grid([1.0], step=7 / 360, insert_first=1 / 360)
    spec = flat_model([1.0, 1.2], [0.2, 0.3], uniform_correlation(2, 0.4), grid)
    spec = spec.with_spot([1.05, 1.1])
    k = diagonal_kernel(spec)
    z = generate_block(17, 0, 100_000, 1, 2).draws[:, 0, :]
    ws = diagonal_weights(k, z, np.sqrt(grid.dt1) * z)
    for w in (ws.delta_weight(grid.dt1), ws.gamma_weight(grid.dt1).reshape(z.shape[0], -1)):
        se = w.std(axis=0) / np.sqrt(w.shape[0])
        assert np.all(np.abs(w.mean(axis=0)) < 3 * se)


def test_batch_equals_single(rng):
    spec, _, _ = random_case(rng, 3)
    k = diagonal_kernel(spec)
    z = rng.standard_normal((5, 3))
    x = rng.standard_normal((5, 3)) * 0.05
    batch = diagonal_weights(k, z, x)
    for i in range(5):
        one = diagonal_weights(k, z[i], x[i])
        np.testing.assert_allclose(batch.lambda1[i], one.lambda1, rtol=1e-15)
        np.testing.assert_allclose(batch.theta1[i], one.theta1, rtol=1e-15)
    t0, t1 = delta_weights(k, z, x)
    np.testing.assert_array_equal(t1, batch.theta1)
    np.testing.assert_array_equal(gamma_weights(k, z, x)[2], batch.lambda2)


def test_singular_and_shape_errors(quarterly_grid):
    spec = flat_model([1.0, 1.0], [0.2, 0.2], uniform_correlation(2, 1.0), quarterly_grid)
    with pytest.raises(SingularCorrelationError):
        diagonal_kernel(spec)
    ok = diagonal_kernel(flat_model([1.0, 1.0], [0.2, 0.2], np.eye(2), quarterly_grid))
    with pytest.raises(InvalidInputError):
        delta_weights(ok, np.zeros(2), np.zeros(3))


def test_check_symmetric():
    a = np.array([[1.0, 2.0], [2.0 + 1e-13, 3.0]])
    out = check_symmetric(a)
    np.testing.assert_array_equal(out, out.T)
    with pytest.raises(ArithmeticError):
        check_symmetric(np.array([[1.0, 2.0], [2.1, 3.0]]))
