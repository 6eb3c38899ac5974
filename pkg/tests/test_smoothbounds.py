import numpy as np
import pytest

from cgbias import (
    CostClass,
    Identity,
    MeanVar,
    Pessimism,
    Polynomial,
    SmoothnessParams,
    Tax,
    Unsupported,
    adversarial_fraction_bound,
    affine_tax_bound,
    analytic_biased_smoothness,
    apply_bias,
    audit_instance,
    bpoa_upper_bound,
    diverse_bound_sum,
    diverse_bound_weighted,
    diverse_max_affine,
    fit_mu_hat,
    gen_pigou,
    gen_risk_unbounded,
    measured_bpoa,
    poly_mu,
    verify_biased_smoothness,
)
from cgbias.flowsolve import AgentType

AFFINE, QUAD = CostClass("affine"), CostClass("quadratic")


def test_poly_mu():
    assert poly_mu(1) == pytest.approx(0.25)
    assert poly_mu(2) == pytest.approx(2 * 3 ** -1.5)


@pytest.mark.parametrize(
    "cls,bias,bound",
    [
        (AFFINE, Identity(), 4 / 3),
        (AFFINE, Tax(0.5), 4 / (4 * 1.5 - 1.5**2)),
        (AFFINE, Tax(1.0), 1.0),
        (AFFINE, Tax(3.0), 16 / 12),
        (QUAD, Tax(2.0), 125 / 108),
        (QUAD, Pessimism(2.5), 1.5625),
        (AFFINE, Pessimism(2.0), 1.0),
    ],
)
def test_analytic_bounds(cls, bias, bound):
    assert analytic_biased_smoothness(cls, bias).bound == pytest.approx(bound, rel=1e-12)


def test_affine_tax_bound_continuity():
    assert affine_tax_bound(0) == pytest.approx(4 / 3)
    assert affine_tax_bound(1 - 1e-9) == pytest.approx(affine_tax_bound(1 + 1e-9), abs=1e-8)
    for b in (0.25, 0.5, 2, 4):
        assert affine_tax_bound(b) == pytest.approx(analytic_biased_smoothness(AFFINE, Tax(b)).bound)


def test_sharpest_candidate_wins_and_alternatives_kept():
    p = analytic_biased_smoothness(CostClass("poly", 3), Tax(2.0))
    assert len(p.alternatives) >= 2
    assert p.bound == pytest.approx(min(a / (1 - m) for _, a, m in p.alternatives))


def test_quadratic_pessimism_gap_unsupported():
    with pytest.raises(Unsupported):
        analytic_biased_smoothness(QUAD, Pessimism(1.9))
    with pytest.raises(Unsupported):
        analytic_biased_smoothness(QUAD, MeanVar(1.0, Polynomial([0, 1])))


def test_meanvar_bound():
    p = analytic_biased_smoothness(AFFINE, MeanVar(1.0, Polynomial([0, 1]), kappa=2.0))
    assert p.bound == pytest.approx(3 / 0.75)


def test_verify_pass_and_fail():
    c = Polynomial([0, 1])
    ok = verify_biased_smoothness(c, c, SmoothnessParams(1, 0.25))
    assert ok.ok
    bad = verify_biased_smoothness(c, c, SmoothnessParams(1, 0.2))
    assert not bad.ok
    x, xp = bad.witness
    assert x * x + x * (xp - x) - xp * xp - 0.2 * x * x == pytest.approx(bad.violation, rel=1e-9)


def test_verify_quadratic_pessimism_appendix_pair():
    c = Polynomial([0, 0, 1])
    bc = apply_bias(c, Pessimism(1.5)).perceived
    assert verify_biased_smoothness(c, bc, SmoothnessParams(1, 0.842 - 0.457 * 1.5)).ok


@pytest.mark.parametrize("beta", [0, 0.25, 0.5, 0.75, 1])
@pytest.mark.parametrize("degree", [1, 2])
def test_fit_matches_closed_form(beta, degree):
    coef = np.zeros(degree + 1)
    coef[degree] = 1
    c = Polynomial(coef)
    bc = apply_bias(c, Tax(beta)).perceived
    cls = CostClass("poly", degree)
    assert fit_mu_hat(c, bc).mu == pytest.approx(analytic_biased_smoothness(cls, Tax(beta)).mu, abs=2e-2)


def test_fit_clamps_negative_mu():
    p = fit_mu_hat(Polynomial([1.0]), Polynomial([2.0]), lam=2.0)
    assert p.mu == 0.0 and "reported as 0" in p.note


def test_diverse_sum_examples():
    a = analytic_biased_smoothness(AFFINE, Tax(0))
    b = analytic_biased_smoothness(AFFINE, Tax(1))
    assert diverse_bound_sum([a, b]) == pytest.approx(7 / 3)
    assert diverse_bound_sum([a]) == pytest.approx(bpoa_upper_bound(a))
    assert diverse_bound_sum([SmoothnessParams(1, 0.25)] * 3) == pytest.approx(4)


def test_diverse_weighted_examples():
    base = SmoothnessParams(1, 0.25)
    assert diverse_bound_weighted(base, [(0.5, 1, 0.25, 1, 0.25), (0.5, 1, 0.25, 1, 0)]) == pytest.approx(28 / 9)
    mu = poly_mu(2)
    pref = diverse_bound_weighted(SmoothnessParams(1, mu), [(1, 1, mu, 1, 0)])
    assert pref == pytest.approx(7.06, abs=0.02)
    with pytest.raises(Unsupported):
        diverse_bound_weighted(SmoothnessParams(1, 0.5), [(1, 1, 0, 1, 0)])


def test_adversarial_and_max_bounds():
    assert adversarial_fraction_bound(SmoothnessParams(1, 0.25), 0.1) == pytest.approx(4 / 3 / 0.9)
    assert adversarial_fraction_bound(SmoothnessParams(1, 0), 0.5) == pytest.approx(2)
    assert diverse_max_affine([0.2, 0.5, 1.0]) == pytest.approx(4 / (4 * 1.2 - 1.44))
    assert diverse_max_affine([2, 3]) == pytest.approx(4 / 3)
    assert diverse_max_affine([0.5, 2]) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        diverse_max_affine([])


def test_measured_bpoa_examples(cfg):
    assert measured_bpoa(gen_pigou(1, 1), cfg).measured_bpoa == pytest.approx(4 / 3, abs=1e-6)
    assert measured_bpoa(gen_pigou(1 / 1.5, 1, Tax(0.5)), cfg).measured_bpoa == pytest.approx(1.0667, abs=1e-3)
    assert measured_bpoa(gen_pigou(0.3, 3, Tax(1.0)), cfg).measured_bpoa == pytest.approx(1.0, abs=1e-6)


def test_audit_symmetric_two_type_pigou(cfg):
    inst = gen_pigou(1, 1)
    t = inst.types[0]
    inst = inst.with_types([AgentType(t.source, t.target, 0.5, Tax(0.2)), AgentType(t.source, t.target, 0.5, Tax(0.8))])
    rep = audit_instance(inst, cfg)
    assert rep.passed, rep.table()
    assert all(r.slack is None or r.slack >= -1e-9 for r in rep.rows if r.status == "PASS")


def test_audit_skips_dsp_checks_off_dsp():
    rep = audit_instance(gen_risk_unbounded(0.2, 1.0))
    assert rep.measured > 1
    skipped = [r for r in rep.rows if r.status == "SKIPPED"]
    assert any("series-parallel" in r.detail for r in skipped)
    # the only failing row may be the upper ratio bound chat/c* <= lam_hat
    assert all(r.check.startswith("chat/c* <= lam_hat") for r in rep.failed)


def test_audit_optimal_taxation_single_type(cfg):
    rep = audit_instance(gen_pigou(0.7, 2, Tax(1.0)), cfg)
    row = next(r for r in rep.rows if r.check.startswith("fraction-independent"))
    assert row.status == "PASS" and row.slack == pytest.approx(0, abs=1e-6)
