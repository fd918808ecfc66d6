import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import truncnorm

from ionscope.grid import (
    DegenerateEvidenceError,
    GaussianPrior,
    ParameterAxis,
    ParameterGrid,
    bayes_update,
    condition,
    entropy,
    make_grid,
    marginal_evidence,
    summarize,
)
from ionscope.estimation import Dataset
from ionscope.models import EdgeModel, edge_transmission

from helpers import ConstantModel, TableModel, grids, random_grid


def unit_axis(n=11, lo=0.0, hi=1.0, name="t"):
    return ParameterAxis(name, lo, hi, n)


# -- make_grid ------------------------------------------------------------------


def test_uniform_unit_interval_has_unit_density():
    g = make_grid([unit_axis()])
    assert np.allclose(g.weights, 1.0, rtol=0, atol=1e-14)
    assert abs(g.total_mass() - 1) < 1e-12


def test_very_wide_gaussian_is_flat():
    g = make_grid([unit_axis()], GaussianPrior((0.5,), (1e6,)))
    assert np.ptp(g.weights) / g.weights.mean() < 1e-6


def test_gaussian_product_peaks_at_mean():
    g = make_grid([unit_axis(name="u"), unit_axis(name="v")], GaussianPrior((0.5, 0.5), (0.1, 0.1)))
    assert np.unravel_index(np.argmax(g.weights), g.shape) == (5, 5)
    # product of independent marginals, checked node by node
    x = np.linspace(0, 1, 11)
    f = np.exp(-0.5 * ((x - 0.5) / 0.1) ** 2)
    expect = np.outer(f, f)
    assert np.allclose(g.weights / g.weights.max(), expect / expect.max(), rtol=1e-12)


def test_infinite_std_leaves_axis_flat():
    g = make_grid([unit_axis(name="u"), unit_axis(name="v")], GaussianPrior((0.5, 0.0), (0.2, None)))
    assert np.allclose(g.weights, g.weights[:, :1])


@pytest.mark.parametrize("lo, hi, count, text", [(0, 1, 1, "count ≥ 2"), (1, 1, 5, "hi > lo"),
                                                 (2, 1, 5, "hi > lo"), (0, math.inf, 5, "finite")])
def test_bad_axis_rejected(lo, hi, count, text):
    with pytest.raises(ValueError, match=text):
        ParameterAxis("t", lo, hi, count)


def test_nonpositive_gaussian_std_rejected():
    with pytest.raises(ValueError, match="std"):
        GaussianPrior((0.0,), (0.0,))


# -- bayes_update / marginal_evidence -----------------------------------------------


def test_two_node_posterior_ratio():
    g = make_grid([ParameterAxis("t", 0, 1, 2)])
    post = bayes_update(g, TableModel([0.8, 0.4]), 0.0, 1)
    assert post.weights[0] / post.weights[1] == pytest.approx(2.0, rel=1e-14)


def test_constant_likelihood_is_a_fixed_point():
    g = random_grid(np.random.default_rng(1), 3)
    for y in (0, 1):
        post = bayes_update(g, ConstantModel(0.3, g.names), 0.0, y)
        assert np.allclose(post.weights, g.weights, rtol=1e-12, atol=0)


def test_edge_probe_far_below_beam_only_reweights_efficiency():
    g = make_grid([ParameterAxis("x0", -5, 5, 5), ParameterAxis("sigma", 5, 15, 4),
                   ParameterAxis("a", 0.8, 1.0, 3)])
    post = bayes_update(g, EdgeModel(), -1e4, 1)
    # explicit per-node arithmetic: likelihood a * erfc(...)/2 with erfc -> 2
    x0, s, a = np.meshgrid(*[ax.values for ax in g.axes], indexing="ij")
    lik = a * edge_transmission(x0, s, -1e4)
    expect = lik * g.weights
    expect /= np.sum(expect * g.volumes)
    assert np.allclose(post.weights, expect, rtol=1e-13)
    assert np.allclose(lik, a, rtol=0, atol=1e-15)


def test_update_does_not_touch_input():
    g = random_grid(np.random.default_rng(2))
    before = g.weights.copy()
    bayes_update(g, ConstantModel(0.5, g.names), 0.0, 1)
    assert np.array_equal(g.weights, before)
    with pytest.raises(ValueError):
        g.weights[(0,) * g.weights.ndim] = 3.0


def test_impossible_outcome_raises():
    g = make_grid([unit_axis()])
    with pytest.raises(DegenerateEvidenceError):
        bayes_update(g, ConstantModel(0.0), 0.0, 1)


def test_bad_outcome_value_rejected():
    g = make_grid([unit_axis()])
    with pytest.raises(ValueError):
        bayes_update(g, ConstantModel(0.5), 0.0, 2)


def test_marginal_evidence_examples():
    g = make_grid([unit_axis()])
    assert marginal_evidence(g, ConstantModel(0.3), 0.0, 1) == pytest.approx(0.3, abs=1e-14)
    two = make_grid([ParameterAxis("t", 0, 1, 2)])
    assert marginal_evidence(two, TableModel([1.0, 0.0]), 0.0, 1) == pytest.approx(0.5, abs=1e-15)


def test_marginal_evidence_edge_three_sigmas_by_hand():
    axes = [ParameterAxis("x0", -1, 1, 2), ParameterAxis("sigma", 4, 12, 3), ParameterAxis("a", 0.9, 1.0, 2)]
    g = make_grid(axes)
    xi = 3.0
    total = 0.0
    for i, x0 in enumerate(axes[0].values):
        for j, s in enumerate(axes[1].values):
            for k, a in enumerate(axes[2].values):
                m = g.weights[i, j, k] * axes[0].quadrature[i] * axes[1].quadrature[j] * axes[2].quadrature[k]
                total += m * a * 0.5 * math.erfc((xi - x0) / (s * math.sqrt(2)))
    assert marginal_evidence(g, EdgeModel(), xi, 1) == pytest.approx(total, abs=1e-15)


@given(grids(), st.floats(-20, 20), st.integers(0, 2**31))
def test_evidences_sum_to_one(g, xi, seed):
    p = np.random.default_rng(seed).random(g.shape)
    model = TableModel(lambda theta, _: p, g.names)
    e0 = marginal_evidence(g, model, xi, 0)
    e1 = marginal_evidence(g, model, xi, 1)
    assert abs(e0 + e1 - 1) <= 1e-10
    assert -1e-12 <= e1 <= 1 + 1e-12


@given(grids(), st.lists(st.tuples(st.integers(0, 2**31), st.integers(0, 1)), min_size=1, max_size=25))
def test_updates_stay_normalized_and_finite(g, steps):
    for seed, y in steps:
        p = np.random.default_rng(seed).uniform(0.01, 0.99, g.shape)
        g = bayes_update(g, TableModel(p, g.names), 0.0, y)
        assert abs(g.total_mass() - 1) <= 1e-10
        assert np.all(np.isfinite(g.weights)) and np.all(g.weights >= 0)


@given(grids(), st.integers(0, 2**31), st.integers(0, 1), st.integers(0, 1))
def test_update_order_does_not_matter(g, seed, y1, y2):
    rng = np.random.default_rng(seed)
    p1, p2 = rng.uniform(0.05, 0.95, (2,) + g.shape)
    m1, m2 = TableModel(p1, g.names), TableModel(p2, g.names)
    ab = bayes_update(bayes_update(g, m1, 0.0, y1), m2, 0.0, y2)
    ba = bayes_update(bayes_update(g, m2, 0.0, y2), m1, 0.0, y1)
    assert np.allclose(ab.weights, ba.weights, rtol=1e-10, atol=1e-10 * ab.weights.max())


def test_batch_condition_matches_chained_updates():
    g = make_grid([ParameterAxis("x0", -5, 5, 11), ParameterAxis("sigma", 5, 15, 6), ParameterAxis("a", 0.8, 1, 5)])
    rng = np.random.default_rng(4)
    xis = rng.choice(np.linspace(-20, 20, 9), 60)
    ys = rng.integers(0, 2, 60)
    chained = g
    for xi, y in zip(xis, ys):
        chained = bayes_update(chained, EdgeModel(), xi, y)
    batch = condition(g, EdgeModel(), Dataset(xis, ys))
    assert np.allclose(batch.weights, chained.weights, rtol=1e-9, atol=1e-12 * chained.weights.max())


# -- entropy ------------------------------------------------------------------------------


@pytest.mark.parametrize("length", [0.25, 1.0, 2.0, 7.5])
def test_uniform_entropy_is_log_length(length):
    g = make_grid([ParameterAxis("t", 3.0, 3.0 + length, 17)])
    assert entropy(g) == pytest.approx(math.log(length), abs=1e-9)


def test_uniform_entropy_examples():
    assert abs(entropy(make_grid([unit_axis()]))) < 1e-12
    assert entropy(make_grid([unit_axis(hi=2.0)])) == pytest.approx(0.6931, abs=1e-4)


def test_uniform_3d_entropy_is_log_volume():
    g = make_grid([ParameterAxis("u", 0, 2, 5), ParameterAxis("v", 0, 3, 4), ParameterAxis("w", 0, 0.5, 3)])
    assert entropy(g) == pytest.approx(math.log(3.0), abs=1e-9)


def test_truncated_gaussian_entropy_matches_quadrature():
    mu, sd = 0.4, 0.12
    g = make_grid([ParameterAxis("t", 0, 1, 41)], GaussianPrior((mu,), (sd,)))
    dist = truncnorm((0 - mu) / sd, (1 - mu) / sd, loc=mu, scale=sd)
    # oracle: -int p ln p on a grid ten times finer, plus adaptive quadrature
    h, _ = quad(lambda x: -dist.pdf(x) * dist.logpdf(x), 0, 1, points=[mu], limit=200)
    fine = make_grid([ParameterAxis("t", 0, 1, 401)], GaussianPrior((mu,), (sd,)))
    assert entropy(g) == pytest.approx(h, abs=1e-3)
    assert entropy(fine) == pytest.approx(h, abs=1e-4)


# -- summarize ------------------------------------------------------------------------------


def test_symmetric_grid_mean_is_midpoint():
    g = make_grid([ParameterAxis("t", -2, 6, 33)], GaussianPrior((2.0,), (1.5,)))
    s = summarize(g)
    assert abs(s.mean[0] - 2.0) <= g.axes[0].step / 100


def test_delta_like_grid_has_small_std():
    g = make_grid([unit_axis(21)])
    w = np.zeros(21)
    w[7] = 1.0
    g = g.with_weights(w / np.sum(w * g.volumes))
    s = summarize(g)
    assert s.std[0] <= g.axes[0].step
    assert s.mean[0] == pytest.approx(0.35)
    assert s.ci95[0][0] <= s.mean[0] <= s.ci95[0][1]


def test_truncated_gaussian_moments():
    g = make_grid([ParameterAxis("t", 0, 1, 201)], GaussianPrior((0.5,), (0.1,)))
    s = summarize(g)
    assert s.mean[0] == pytest.approx(0.5, abs=1e-3)
    assert s.std[0] == pytest.approx(0.1, abs=2e-3)
    lo, hi = s.ci95[0]
    dist = truncnorm(-5, 5, loc=0.5, scale=0.1)
    assert lo == pytest.approx(dist.ppf(0.025), abs=2e-3)
    assert hi == pytest.approx(dist.ppf(0.975), abs=2e-3)


@given(grids())
def test_summary_invariants(g):
    s = summarize(g)
    for k, ax in enumerate(g.axes):
        assert s.std[k] >= 0
        assert s.ci95[k][0] <= s.mean[k] <= s.ci95[k][1]
        assert ax.lo - 1e-12 <= s.mean[k] <= ax.hi + 1e-12


# -- pruning and serialization --------------------------------------------------------------


@given(grids(), st.sampled_from([1e-3, 1e-6, 1e-12]))
def test_support_box_keeps_all_but_tolerance(g, tol):
    m = g.masses()
    box = g.support_box(tol)
    assert m.sum() - m[box].sum() <= tol * m.sum() * (1 + 1e-9)


@given(grids())
def test_json_round_trip(g):
    back = ParameterGrid.from_json(g.to_json())
    assert back.axes == g.axes
    assert np.array_equal(back.weights, g.weights)


def test_json_layout_is_row_major():
    g = make_grid([ParameterAxis("u", 0, 1, 2), ParameterAxis("v", 0, 1, 3)])
    w = np.arange(6, dtype=float).reshape(2, 3) + 1
    g = g.with_weights(w)
    import json

    raw = json.loads(g.to_json())
    assert raw["weights"] == [1, 2, 3, 4, 5, 6]
    assert [a["name"] for a in raw["axes"]] == ["u", "v"]
