import json
import math

import numpy as np
import pytest

from swgeom.errors import DegenerateMatching, InvalidModel, MatchingViolation
from swgeom.mixtures import ComponentFamily, MixtureModel, SimplexPoint
from swgeom.quadrature import QuadratureSpec
from swgeom.wim import (
    M_TAIL,
    InhomogeneousSpec,
    MetricMatrix,
    Provenance,
    ScalingConstants,
    Variant,
    between_means_integral,
    delta2_asymptotic_ratio,
    diagonal_bounds,
    extended_limit,
    extended_matrix_numeric,
    fisher_limit,
    fisher_matrix_numeric,
    g2_integral,
    g_integral,
    g_prime_at_1,
    inhomogeneous_limit,
    matching_point,
    matching_point_expansion,
    mean_block_numeric,
    offdiagonal_bound,
    pair_matching_point,
    perturbation_lemma_check,
    perturbation_scaled,
    scaling_factor,
    second_order_coefficient,
    second_order_limit,
    sigma_matrix,
    wasserstein_limit,
    wasserstein_matrix_numeric,
    wig_relation_check,
)

G, L = ComponentFamily.GAUSSIAN, ComponentFamily.LAPLACE


def g_closed(k):
    a = (k + 1.0) / k
    return math.pi / (a * math.sin(math.pi / a))


def ratio_to_limit(family, p, sigma, d=1.0):
    """``G_11 / K * sqrt(p1 p2)`` for a two-component model."""
    m = MixtureModel.homogeneous(p, sigma, gap=d, family=family)
    w = wasserstein_matrix_numeric(m)
    K = scaling_factor(family, sigma, d)
    return math.exp(w.log_entry(0, 0).log_magnitude - K.log_magnitude) * math.sqrt(p[0] * p[1])


# ------------------------------------------------------------ numeric Fisher


def test_fisher_two_components():
    m = MixtureModel.homogeneous([0.5, 0.5], 0.01)
    g = fisher_matrix_numeric(m)
    assert g.provenance is Provenance.NUMERIC_FISHER
    assert g.entries[0, 0] == pytest.approx(4.0, rel=1e-3)


def test_fisher_three_components_offdiagonal():
    m = MixtureModel.homogeneous(SimplexPoint.uniform(3), 0.01)
    g = fisher_matrix_numeric(m).entries
    assert g[0, 1] == pytest.approx(-3.0, rel=1e-2)
    np.testing.assert_allclose(g, g.T, rtol=1e-12)


def test_fisher_matches_limit_entrywise():
    p = [0.2, 0.5, 0.3]
    g = fisher_matrix_numeric(MixtureModel.homogeneous(p, 0.01)).entries
    np.testing.assert_allclose(g, fisher_limit(p).entries, rtol=1e-2)


def test_equal_means_rejected():
    with pytest.raises(InvalidModel):
        MixtureModel.homogeneous([0.5, 0.5], 1.0, gap=0.0)


# ------------------------------------------------------------ numeric Wasserstein


def test_wasserstein_second_order_example():
    m = MixtureModel.homogeneous([0.5, 0.5], 0.1)
    w = wasserstein_matrix_numeric(m)
    r = w.divided_by(scaling_factor(G, 0.1, 1.0))[0, 0]
    assert r == pytest.approx(2.0 * (1 + (math.pi ** 2 / 2) * 0.01), rel=1e-2)


@pytest.mark.parametrize("sigma", [0.05, 0.1])
def test_offdiagonal_bound(sigma):
    p = [0.2, 0.5, 0.3]
    w = wasserstein_matrix_numeric(MixtureModel.homogeneous(p, sigma))
    off = w.log_entry(0, 1)
    assert off.sign != 0
    bound = offdiagonal_bound(p, sigma, 1.0)
    expected = 3 * sigma ** 2 * M_TAIL / 0.2 * (1 + 2 * sigma ** 2 / 3 * math.exp(-1 / (2 * sigma ** 2)))
    assert bound == pytest.approx(expected, rel=1e-15)
    assert math.exp(off.log_magnitude) <= bound


@pytest.mark.parametrize("sigma", [0.05, 0.1])
def test_diagonal_sandwich(sigma):
    p = [0.2, 0.5, 0.3]
    m = MixtureModel.homogeneous(p, sigma)
    w = wasserstein_matrix_numeric(m)
    for i in range(2):
        I = between_means_integral(m, i)
        lo, hi = diagonal_bounds(p[i], p[i + 1], sigma, 1.0, I)
        g = w.log_entry(i, i).log_magnitude
        # the upper bound is attained to rounding at sigma=0.05; allow the quadrature tolerance
        assert lo.log_magnitude <= g <= hi.log_magnitude + 1e-9


def test_offdiagonal_suppressed():
    p = [0.2, 0.5, 0.3]
    rel = []
    for sigma in (0.1, 0.07, 0.05):
        w = wasserstein_matrix_numeric(MixtureModel.homogeneous(p, sigma))
        rel.append(math.exp(w.log_entry(0, 1).log_magnitude - w.log_entry(0, 0).log_magnitude))
    assert rel[0] > rel[1] > rel[2]
    assert rel[-1] < 1e-15


@pytest.mark.parametrize("sigma", [0.02, 0.012])
def test_small_sigma_stays_finite(sigma):
    # at sigma=0.012 the diagonal is about e^858, beyond double range
    m = MixtureModel.homogeneous([0.5, 0.5], sigma)
    w = wasserstein_matrix_numeric(m)
    assert np.all(np.isfinite(w.entries))
    if sigma < 0.015:
        assert w.log_scale is not None and w.log_scale > 709
        assert w.dense()[0, 0] == math.inf
    K = scaling_factor(G, sigma, 1.0)
    assert w.divided_by(K)[0, 0] * 0.5 == pytest.approx(1.0, abs=0.01)


def test_reflection_anti_transposes():
    m = MixtureModel(G, [0.0, 1.0, 2.0], [0.2, 0.2, 0.2], [0.2, 0.5, 0.3])
    a = wasserstein_matrix_numeric(m).entries
    b = wasserstein_matrix_numeric(m.reflected()).entries
    np.testing.assert_allclose(b, a[::-1, ::-1].T, rtol=1e-8)
    fa = fisher_matrix_numeric(m).entries
    fb = fisher_matrix_numeric(m.reflected()).entries
    np.testing.assert_allclose(fb, fa[::-1, ::-1].T, rtol=1e-8)


def test_gaussian_convergence_monotone():
    p = (0.3, 0.7)
    res = [abs(ratio_to_limit(G, p, s) - 1.0) for s in (0.1, 0.07, 0.05, 0.03)]
    assert all(x > y for x, y in zip(res, res[1:]))


def test_laplace_convergence_monotone():
    p = (0.3, 0.7)
    res = [abs(ratio_to_limit(L, p, s) - 1.0) for s in (0.1, 0.05, 0.03, 0.02)]
    assert all(x > y for x, y in zip(res, res[1:]))
    assert res[-1] < 0.01


def test_pair_matching_point_is_interior():
    m = MixtureModel.homogeneous([0.7, 0.3], 0.05)
    l = pair_matching_point(m, 0)
    assert l == pytest.approx(matching_point(G, 0.7, 0.3, 1.0, 0.05, 1.0), abs=1e-12)


# ------------------------------------------------------------ limit matrices


def test_fisher_limit_examples():
    np.testing.assert_allclose(fisher_limit([0.5, 0.5]).entries, [[4.0]])
    np.testing.assert_allclose(fisher_limit(SimplexPoint.uniform(3)).entries, [[6, -3], [-3, 6]])
    np.testing.assert_allclose(fisher_limit([0.2, 0.5, 0.3]).entries, [[7, -2], [-2, 16 / 3]])
    assert fisher_limit([0.5, 0.5]).provenance is Provenance.FISHER_LIMIT


def test_wasserstein_limit_examples():
    np.testing.assert_allclose(wasserstein_limit(SimplexPoint.uniform(3)).entries, np.diag([3.0, 3.0]))
    assert wasserstein_limit([0.3, 0.7]).entries[0, 0] == pytest.approx(2.1821789, rel=1e-7)
    np.testing.assert_allclose(
        wasserstein_limit([0.2, 0.5, 0.3]).entries, np.diag([1 / math.sqrt(0.1), 1 / math.sqrt(0.15)])
    )


def test_fisher_limit_is_tridiagonal():
    f = fisher_limit([0.1, 0.2, 0.3, 0.15, 0.25]).entries
    assert np.all(np.triu(f, 2) == 0) and np.all(np.tril(f, -2) == 0)


@pytest.mark.parametrize("build", [fisher_limit, wasserstein_limit])
def test_limits_reverse_under_relabeling(build):
    p = np.array([0.1, 0.2, 0.3, 0.15, 0.25])
    a = build(p).entries
    b = build(p[::-1].copy()).entries
    np.testing.assert_array_equal(b, a[::-1, ::-1])


def test_scaling_factor_examples():
    k = scaling_factor(G, 0.1, 1.0)
    assert k.log_magnitude == pytest.approx(math.log(math.sqrt(2 * math.pi ** 3) * 1e-3) + 12.5, rel=1e-14)
    k = scaling_factor(L, 0.1, 1.0)
    assert k.log_magnitude == pytest.approx(math.log(math.pi * 0.01) + 5.0, rel=1e-14)
    k = scaling_factor(G, 0.02, 1.0)
    assert k.log_magnitude - (math.log(math.sqrt(2 * math.pi ** 3) * 0.02 ** 3)) == pytest.approx(312.5)
    assert k.log_magnitude > 300
    k = scaling_factor(G, 0.1, 0.5, Variant.INHOMOGENEOUS)
    assert k.log_magnitude == pytest.approx(math.log(math.sqrt(2 * math.pi) * 1e-3 / 0.5) + 12.5, rel=1e-14)


def test_scaling_factor_validation():
    with pytest.raises(ValueError):
        scaling_factor(G, 0.0, 1.0)
    with pytest.raises(ValueError):
        scaling_factor(G, 0.1, -1.0)
    with pytest.raises(ValueError):
        scaling_factor(L, 0.1, 1.0, Variant.INHOMOGENEOUS)


def test_scaling_constants():
    c = ScalingConstants.for_family("gaussian", 0.1, 1.0)
    assert c.K == scaling_factor(G, 0.1, 1.0) and c.d == 1.0 and c.sigma == 0.1


# ------------------------------------------------------------ asymptotic integrals


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0, 10.0])
def test_g_closed_form(k):
    assert abs(g_integral(k) - g_closed(k)) < 1e-10


def test_g_examples():
    assert g_integral(1.0) == pytest.approx(math.pi / 2, abs=1e-12)
    assert g_integral(3.0) == pytest.approx(3 * math.pi / (2 * math.sqrt(2)), abs=1e-10)
    assert g_integral(1e-3) == pytest.approx(1.0, abs=2e-3)
    assert g_integral(1e-3) == pytest.approx(g_closed(1e-3), abs=1e-9)


def test_g2_at_one():
    assert g2_integral(1.0) == pytest.approx(math.pi ** 3 / 8, abs=1e-8)


def g2_closed(k):
    # second derivative in s of pi/sin(pi s) at s = 1/a, divided by a^3
    a = (k + 1.0) / k
    s = 1.0 / a
    return math.pi ** 3 * (1 + math.cos(math.pi * s) ** 2) / math.sin(math.pi * s) ** 3 / a ** 3


@pytest.mark.parametrize("k", [0.5, 1.0, 3.0, 10.0])
def test_g2_closed_form(k):
    assert g2_integral(k) == pytest.approx(g2_closed(k), rel=1e-12)


@pytest.mark.parametrize("k", [0.5, 1.0, 3.0])
def test_g2_reflection_identity(k):
    # v -> 1/v maps int_1^inf log^2 v/(1+v^a) onto int_0^1 log^2 v v^(a-2)/(1+v^a)
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    a = mpmath.mpf(k + 1) / k
    lower = mpmath.quad(lambda v: mpmath.log(v) ** 2 / (1 + v ** a), [0, 1])
    # with v = w^k the v^(a-2) singularity becomes the constant k
    upper = mpmath.quad(lambda w: k ** 3 * mpmath.log(w) ** 2 / (1 + w ** (k + 1)), [0, 1])
    assert g2_integral(k) == pytest.approx(float(lower + upper), abs=1e-9)


def test_g2_tolerance_self_consistency():
    a = g2_integral(3.0, QuadratureSpec(rel_tol=1e-10))
    b = g2_integral(3.0, QuadratureSpec(rel_tol=1e-12))
    assert abs(a - b) < 1e-9


def test_g_prime():
    assert g_prime_at_1() == pytest.approx(math.pi / 4, abs=1e-7)
    assert abs(g_prime_at_1(h=1e-4) - g_prime_at_1(h=1e-5)) < 1e-8
    assert g_integral(1.001) - g_integral(0.999) > 0


def test_matching_point_examples():
    assert matching_point(G, 0.4, 0.4, 1.0, 0.1, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert matching_point(L, 0.7, 0.3, 1.0, 0.1, 1.0) == pytest.approx(0.5 + 0.05 * math.log(7 / 3), abs=1e-15)
    l = matching_point(G, 0.7, 0.3, 1.0, 0.05, 1.0)
    assert l == pytest.approx(0.5 + 0.0025 * math.log(7 / 3), abs=1e-4)
    assert l == pytest.approx(matching_point_expansion(0.7, 0.3, 1.0, 0.05, 1.0), abs=1e-4)


def test_matching_point_solves_condition():
    from swgeom.mixtures import component_logpdf

    p_i, p_n, k, s, d = 0.6, 0.4, 3.0, 0.08, 1.0
    l = matching_point(G, p_i, p_n, k, s, d)
    left = math.log(p_i) + component_logpdf(G, l, 0.0, s)
    right = math.log(p_n) + component_logpdf(G, l, d, k * s)
    assert left == pytest.approx(right, abs=1e-10)


def test_degenerate_matching():
    with pytest.raises(DegenerateMatching):
        matching_point(L, 0.999, 0.001, 1.0, 0.2, 1.0)
    with pytest.raises(DegenerateMatching):
        matching_point(G, 1 - 1e-12, 1e-12, 1.0, 0.4, 1.0)


def test_delta2_gaussian():
    assert abs(delta2_asymptotic_ratio(G, 0.5, 0.5, 1.0, 0.05, 1.0) / (math.pi / 2) - 1) < 0.02
    assert abs(delta2_asymptotic_ratio(G, 0.5, 0.5, 1.0, 0.03, 1.0) / (math.pi / 2) - 1) < 0.01


def test_delta2_laplace():
    assert abs(delta2_asymptotic_ratio(L, 0.5, 0.5, 1.0, 0.02, 1.0) / (math.pi / 2) - 1) < 0.01


def test_delta2_k3_converges_to_g3():
    target = g_closed(3.0)
    errs = [abs(delta2_asymptotic_ratio(G, 0.5, 0.5, 3.0, s, 1.0) - target) for s in (0.05, 0.03, 0.02)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] / target < max(0.02, 5 * 0.02)


# ------------------------------------------------------------ second order


def test_second_order_equal_weights():
    m = second_order_limit([0.5, 0.5], 0.05, 1.0)
    assert m.provenance is Provenance.SECOND_ORDER_LIMIT
    assert m.entries[0, 0] == pytest.approx(2.0 * (1 + math.pi ** 2 / 2 * 0.0025), rel=1e-12)


def test_second_order_vanishing_sigma():
    p = [0.2, 0.5, 0.3]
    np.testing.assert_allclose(second_order_limit(p, 1e-9, 1.0).entries, wasserstein_limit(p).entries, rtol=1e-15)


def test_second_order_unequal_weights():
    L7 = math.log(7 / 3)
    c = math.pi ** 2 / 2 + (4 / math.pi) * (math.pi / 4) * L7 + (2 / math.pi) * L7 ** 2
    m = second_order_limit([0.7, 0.3], 0.05, 1.0)
    assert m.entries[0, 0] == pytest.approx((1 + c * 0.0025) / math.sqrt(0.21), rel=1e-9)


def test_second_order_coefficient_symmetry():
    # the stated coefficient is odd in log(p_i/p_next); the rederived one is even
    a = second_order_coefficient(0.3, 0.7, math.pi / 4)
    b = second_order_coefficient(0.7, 0.3, math.pi / 4)
    assert a != pytest.approx(b)
    a = second_order_coefficient(0.3, 0.7, math.pi / 4, rederived=True)
    b = second_order_coefficient(0.7, 0.3, math.pi / 4, rederived=True)
    assert a == pytest.approx(b, rel=1e-15)


def test_rederived_coefficient_matches_quadrature():
    p, sigma = (0.3, 0.7), 0.03
    residual = ratio_to_limit(G, p, sigma) - 1.0
    c = second_order_coefficient(*p, math.pi / 4, rederived=True)
    assert residual / sigma ** 2 == pytest.approx(c, rel=0.02)


def test_second_order_validation():
    with pytest.raises(ValueError):
        second_order_limit([0.5, 0.5], 0.6, 1.0)


# ------------------------------------------------------------ inhomogeneous


def test_inhomogeneous_uniform_scales():
    ispec = InhomogeneousSpec([2.0, 2.0], [1.0, 1.0, 1.0], 0.1, 1.0)
    p = [0.2, 0.5, 0.3]
    m = inhomogeneous_limit(p, ispec)
    assert m.provenance is Provenance.INHOMOGENEOUS_LIMIT
    np.testing.assert_allclose(np.diag(m.entries), [math.pi / 2 / math.sqrt(0.1), math.pi / 2 / math.sqrt(0.15)],
                               rtol=1e-10)


def test_inhomogeneous_worked_example():
    p = [0.2, 0.5, 0.3]
    model = MixtureModel(G, [-1.0, 0.0, 2.0], [0.04, 0.04, 0.12], p)
    ispec = InhomogeneousSpec.from_model(model)
    assert ispec.reduced_gap == pytest.approx(0.5)
    m = inhomogeneous_limit(p, ispec)
    expected = [math.pi / (2 * math.sqrt(0.1)), 3 ** 0.75 * g_closed(3.0) / (0.5 ** 0.25 * 0.3 ** 0.75)]
    np.testing.assert_allclose(np.diag(m.entries), expected, rtol=1e-10)
    # K_in at reduced gap 1/2 is the worked example's 2 sqrt(2 pi) sigma^3 e^(1/8 sigma^2)
    s = 0.04
    assert ispec.scaling().log_magnitude == pytest.approx(
        math.log(2 * math.sqrt(2 * math.pi) * s ** 3) + 1 / (8 * s * s), rel=1e-14)


def test_inhomogeneous_numeric_convergence():
    p = [0.2, 0.5, 0.3]
    s = 0.04
    model = MixtureModel(G, [-1.0, 0.0, 2.0], [s, s, 3 * s], p)
    ispec = InhomogeneousSpec.from_model(model)
    w = wasserstein_matrix_numeric(model).divided_by(ispec.scaling())
    lim = inhomogeneous_limit(p, ispec).entries
    np.testing.assert_allclose(np.diag(w), np.diag(lim), rtol=0.05)


def test_matching_violation():
    with pytest.raises(MatchingViolation) as info:
        InhomogeneousSpec([1.0, 3.0], [1.0, 1.0, 1.0], 0.1, 0.5)
    assert info.value.gap_index == 2
    with pytest.raises(MatchingViolation):
        InhomogeneousSpec.from_model(MixtureModel(G, [-1.0, 0.0, 2.0], [0.1, 0.1, 0.1], [0.2, 0.5, 0.3]))


# ------------------------------------------------------------ extended metric


def test_extended_limit_example():
    e = extended_limit([0.5, 0.5], [0.0, 1.0], 0.1)
    np.testing.assert_array_equal(e.block_mumu, np.diag([0.5, 0.5]))
    np.testing.assert_array_equal(e.block_thmu, [[0.5, 0.5]])
    np.testing.assert_allclose(e.theta_block_scaled, wasserstein_limit([0.5, 0.5]).entries)
    r = e.rescaled()
    assert np.all(r[:1, 1:] == 0.0) and np.all(r[1:, :1] == 0.0)
    f = e.full()
    np.testing.assert_array_equal(f, f.T)


def test_extended_limit_needs_equal_gaps():
    with pytest.raises(InvalidModel):
        extended_limit([0.2, 0.5, 0.3], [0.0, 1.0, 3.0], 0.1)


def test_extended_numeric():
    p = [0.2, 0.5, 0.3]
    model = MixtureModel.homogeneous(p, 0.02)
    num = extended_matrix_numeric(model)
    lim = extended_limit(p, model.means, 0.02)
    np.testing.assert_allclose(num.block_mumu, lim.block_mumu, atol=1e-3)
    np.testing.assert_allclose(num.block_thmu, lim.block_thmu, rtol=1e-2, atol=1e-12)
    n = model.n
    cross = num.rescaled()[: n - 1, n - 1:]
    assert np.max(np.abs(cross)) < 1e-50


# ------------------------------------------------------------ WIG relation


@pytest.mark.parametrize("sigma", [0.05, 0.2, 1.0])
def test_wig_two_components(sigma):
    assert wig_relation_check(MixtureModel.homogeneous([0.3, 0.7], sigma)) < 1e-7


def test_wig_three_components():
    assert wig_relation_check(MixtureModel.homogeneous([0.2, 0.5, 0.3], 0.1)) < 1e-6


def test_sigma_product_is_fisher_limit():
    p = np.array([0.2, 0.5, 0.3])
    s = sigma_matrix(p)
    np.testing.assert_allclose(s @ np.diag(p) @ s.T, fisher_limit(p).entries, rtol=1e-15)


def test_mean_block_tends_to_diag_p():
    p = [0.2, 0.5, 0.3]
    np.testing.assert_allclose(mean_block_numeric(MixtureModel.homogeneous(p, 0.05)), np.diag(p), atol=1e-12)


# ------------------------------------------------------------ perturbation


def test_perturbation_examples():
    g2 = math.pi ** 3 / 8
    d20 = perturbation_scaled(1.0, 1.0, 20.0) / g2 - 1
    d40 = perturbation_scaled(1.0, 1.0, 40.0) / g2 - 1
    assert abs(d20) < 0.06 and abs(d40) < 0.03
    assert perturbation_lemma_check(1.0, 1.0, 20.0) * 2 * 20.0 ** 3 == pytest.approx(
        perturbation_scaled(1.0, 1.0, 20.0), rel=1e-14)


def test_perturbation_deviation_shrinks():
    g2 = math.pi ** 3 / 8
    devs = [abs(perturbation_scaled(1.0, 1.0, t) / g2 - 1) for t in (10.0, 20.0, 40.0)]
    assert devs[0] > devs[1] > devs[2]


def test_perturbation_needs_large_t():
    with pytest.raises(ValueError):
        perturbation_lemma_check(1.0, 1.0, 2.0)


# ------------------------------------------------------------ MetricMatrix


def test_metric_json_round_trip():
    m = MetricMatrix(np.array([[2.0, -0.5], [-0.5, 1.0]]), Provenance.NUMERIC_WASSERSTEIN, log_scale=3.5)
    data = json.loads(m.to_json())
    assert data == {"provenance": "NumericWasserstein", "n": 2, "entries": [[2.0, -0.5], [-0.5, 1.0]],
                    "log_scale": 3.5}
    back = MetricMatrix.from_dict(data)
    np.testing.assert_array_equal(back.entries, m.entries)
    assert back.log_scale == 3.5 and back.provenance is Provenance.NUMERIC_WASSERSTEIN


def test_metric_validation():
    with pytest.raises(ValueError):
        MetricMatrix(np.array([[1.0, 0.2], [0.0, 1.0]]), Provenance.FISHER_LIMIT)
    with pytest.raises(ValueError):
        MetricMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]), Provenance.NUMERIC_FISHER)
    with pytest.raises(ValueError):
        MetricMatrix.from_dict({"provenance": "FisherLimit", "n": 1, "entries": [[1.0]], "bogus": 0})
    with pytest.raises(ValueError):
        MetricMatrix.from_dict({"provenance": "FisherLimit", "n": 2, "entries": [[1.0]]})


def test_metric_dense_and_log_entry():
    m = MetricMatrix(np.array([[1.0]]), Provenance.NUMERIC_WASSERSTEIN, log_scale=800.0)
    assert m.dense()[0, 0] == math.inf
    assert m.log_entry(0, 0).log_magnitude == pytest.approx(800.0)
    m = MetricMatrix(np.array([[2.0]]), Provenance.NUMERIC_WASSERSTEIN, log_scale=1.0)
    assert m.dense()[0, 0] == pytest.approx(2 * math.e)
