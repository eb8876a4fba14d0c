import numpy as np
import pytest

from oracles import BsParams, bs_call
from pwgreeks import (
    Autocallable,
    ConfigError,
    Constant,
    EuropeanCall,
    InvalidInputError,
    Linear,
    RunConfig,
    Smoothing,
    build_grid,
    european_call,
    generate_block,
    performance,
    simulate,
)
from pwgreeks.payoffs import smooth_indicator_down, smooth_indicator_up, smooth_put

KO = [0.25, 0.5, 0.75, 1.0]


def note(level=0, b=-0.01, k=0.01, n=1):
    return Autocallable(KO, [0.1] * 4, [0.95, 0.9, 0.85, 0.8], 0.75, 1.0, np.ones(n), Smoothing(level, b, k))


def grid():
    return build_grid(KO, step=7 / 360, insert_first=1 / 360)


def path_through(g, values_at_events, n=1, fill=1.0):
    """One path equal to ``fill`` except at the knock-out dates."""
    p = np.full((1, g.n_steps + 1, n), fill)
    for t, v in zip(KO, values_at_events):
        p[0, g.index_of(t)] = v
    return p


def test_performance():
    assert performance(np.array([[1.0]]), [1.0])[0] == 1.0
    assert performance(np.array([[1.1, 0.9]]), [1.0, 1.0])[0] == pytest.approx(0.9)
    path = np.full((5, 2), 1.3)
    np.testing.assert_allclose(performance(path, [1.3, 1.3]), 1.0)


def test_autocallable_cases():
    g = grid()
    assert note()(path_through(g, [1.0, 1.0, 1.0, 1.0]), g)[0] == pytest.approx(0.1)
    assert note()(path_through(g, [0.9, 0.8, 0.8, 0.78]), g)[0] == 0.0
    assert note()(path_through(g, [0.9, 0.8, 0.8, 0.6]), g)[0] == pytest.approx(0.4)
    # knock-out on the third date
    assert note()(path_through(g, [0.9, 0.85, 0.86, 0.5]), g)[0] == pytest.approx(0.1)


def test_worst_of_basket():
    g = grid()
    p = path_through(g, [1.0] * 4, n=2)
    p[0, g.index_of(0.25), 1] = 0.9
    assert note(n=2)(p, g)[0] == pytest.approx(0.1)  # 0.9 < 0.95 on date 1, KO on date 2
    p[0, :, 1] = 0.7
    assert note(n=2)(p, g)[0] == pytest.approx(0.3)


def test_smooth_indicator_values():
    b = -0.01
    B = 0.9
    assert smooth_indicator_up(B + b, B, b) == pytest.approx(0.5)
    assert smooth_indicator_up(B + b + abs(b), B, b) == pytest.approx(1.0)
    assert smooth_indicator_up(B + b - abs(b), B, b) == pytest.approx(0.0)
    assert smooth_indicator_down(B + b + abs(b), B, b) == pytest.approx(0.0)
    with pytest.raises(InvalidInputError):
        smooth_indicator_up(1.0, B, 0.0)


def test_smooth_put_values():
    K, k = 1.0, 0.01
    assert smooth_put(K + k, K, k) == pytest.approx(0.0)
    assert smooth_put(K, K, k) == pytest.approx(k / 4)
    assert smooth_put(K - k, K, k) == pytest.approx(k)
    assert smooth_put(0.5, K, k) == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        smooth_put(1.0, K, 0.0)


def test_european_call_values():
    assert european_call(np.array([1.0, 1.0]), 1.0) == 0.0
    assert european_call(np.array([1.0, 1.2]), 1.0) == pytest.approx(0.2)
    p = np.array([[[1.0, 2.0], [1.2, 0.5]]])
    assert EuropeanCall(1.0, asset=1)(p)[0] == 0.0
    assert Linear()(p)[0] == pytest.approx(1.7)
    assert Constant(3.0)(p)[0] == 3.0
    with pytest.raises(InvalidInputError):
        EuropeanCall(0.0)


def test_european_call_mc_price(bs_spec):
    block = generate_block(1, 0, 100_000, bs_spec.grid.n_steps, 1)
    v = EuropeanCall(1.0)(simulate(bs_spec, block.draws))
    price, _, _ = bs_call(BsParams(1.0, 1.0, 0.2, 1.0))
    assert abs(v.mean() - price) < 3 * v.std() / np.sqrt(v.size)


def test_smoothing_converges_to_indicator(quarterly_grid):
    from pwgreeks import flat_model

    spec = flat_model([1.0], [0.2], [[1.0]], quarterly_grid)
    paths = simulate(spec, generate_block(5, 0, 20_000, quarterly_grid.n_steps, 1).draws)
    exact = note(0)(paths, quarterly_grid)
    diffs = []
    for w in (0.04, 0.02, 0.01, 0.005):
        smooth = note(2, b=-w, k=w)(paths, quarterly_grid)
        diffs.append(np.mean(np.abs(smooth - exact) > 1e-12))
    assert all(a > b for a, b in zip(diffs, diffs[1:]))
    assert diffs[-1] < 0.02


def test_event_times_only(quarterly_grid):
    from pwgreeks import flat_model

    spec = flat_model([1.0], [0.2], [[1.0]], quarterly_grid)
    paths = simulate(spec, generate_block(6, 0, 500, quarterly_grid.n_steps, 1).draws)
    idx = note().event_indices(quarterly_grid)
    other = np.setdiff1d(np.arange(quarterly_grid.n_steps + 1), idx)
    bumped = paths.copy()
    bumped[:, other] *= 1.7
    for lvl in (0, 1, 2):
        np.testing.assert_array_equal(note(lvl)(paths, quarterly_grid), note(lvl)(bumped, quarterly_grid))


def test_smoothness_orders():
    g = grid()
    r = np.linspace(0.7, 1.1, 4001)
    h = r[1] - r[0]

    def profile(f):
        return np.array([f(path_through(g, [0.5, 0.5, 0.5, x]), g)[0] for x in r])

    # barriers in range: only level 0 jumps
    jumps = {lvl: np.max(np.abs(np.diff(profile(note(lvl))))) for lvl in (0, 1, 2)}
    assert jumps[0] > 0.05
    assert jumps[1] < 0.01 and jumps[2] < 0.01
    # knock-in always on and no knock-out at maturity: isolates the put kink at 1.0
    kinks = {}
    for lvl in (1, 2):
        f = Autocallable(KO, [0.1] * 4, [2.0] * 4, 2.0, 1.0, [1.0], Smoothing(lvl, b=-0.01, k=0.01))
        kinks[lvl] = np.max(np.abs(np.diff(profile(f), 2))) / h
    assert kinks[1] > 0.9  # slope jumps by one at the strike
    assert kinks[2] < 0.05  # level 2 is C1


def test_validation(quarterly_grid):
    with pytest.raises(ConfigError):
        Autocallable(KO, [0.1] * 3, [0.9] * 4, 0.75, 1.0, [1.0])
    with pytest.raises(ConfigError):
        Autocallable(KO, [0.1] * 4, [0.9] * 4, 0.75, 1.0, [1.0], maturity=0.5)
    with pytest.raises(InvalidInputError):
        Smoothing(3)
    with pytest.raises(InvalidInputError):
        Smoothing(1, b=0.0)
    first_on_event = build_grid([1 / 360, 0.5], step=7 / 360)
    f = Autocallable([1 / 360, 0.5], [0.1, 0.1], [1.0, 1.0], 0.75, 1.0, [1.0])
    with pytest.raises(ConfigError):
        f(np.ones((1, first_on_event.n_steps + 1, 1)), first_on_event)
    off_grid = Autocallable([0.3, 1.0], [0.1, 0.1], [1.0, 1.0], 0.75, 1.0, [1.0])
    with pytest.raises(ConfigError):
        off_grid.event_indices(quarterly_grid)
    assert Smoothing(1, b=-0.02).ki_b == -0.02
