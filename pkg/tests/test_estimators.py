import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cgbias import (
    BiasedEquilibrium,
    BPoAEstimator,
    Polynomial,
    SmoothnessFitter,
    SocialOptimum,
    Tax,
    apply_bias,
    gen_braess_quadratic,
    gen_pigou,
)


def test_get_set_params_and_clone():
    est = BiasedEquilibrium(tolerance=1e-9, restarts=2)
    params = est.get_params()
    assert params["tolerance"] == 1e-9 and params["restarts"] == 2 and params["biased"] is True
    other = clone(est).set_params(biased=False)
    assert other.biased is False and est.biased is True


def test_equilibrium_estimator():
    est = BiasedEquilibrium().fit(gen_braess_quadratic(Tax(1.0)))
    assert est.loads()["u-a"] == pytest.approx(3**-0.5, abs=1e-6)
    assert est.certificate_.converged
    true = BiasedEquilibrium(biased=False).fit(gen_braess_quadratic(Tax(1.0)))
    assert true.social_cost_ == pytest.approx(2.0)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BiasedEquilibrium().loads()


def test_bpoa_and_optimum():
    inst = gen_pigou(1, 1)
    assert BPoAEstimator().fit(inst).bpoa_ == pytest.approx(4 / 3)
    assert SocialOptimum().fit(inst).social_cost_ == pytest.approx(0.75)


def test_smoothness_fitter():
    c = Polynomial([0, 1])
    fit = SmoothnessFitter().fit([(c, c)])
    assert (fit.lam_, fit.mu_) == (1.0, pytest.approx(0.25))
    free = SmoothnessFitter(lam=None).fit([(c, apply_bias(c, Tax(2.0)).perceived)])
    # fitted pair is valid, so its bound cannot beat the tight closed form 9/8
    assert free.bound_ >= 9 / 8 - 1e-9
    assert free.bound_ < 1.2
    with pytest.raises(ValueError):
        SmoothnessFitter().fit([])
