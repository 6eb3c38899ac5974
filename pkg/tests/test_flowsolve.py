import math

import numpy as np
import pytest
from scipy.optimize import minimize

from cgbias import (
    AgentType,
    Identity,
    NotConverged,
    Pessimism,
    Polynomial,
    SolverConfig,
    Tax,
    build_dsp,
    derive_homogeneous,
    dsp_edge,
    dsp_parallel,
    dsp_series,
    decompose_paths,
    gen_braess_quadratic,
    gen_pigou,
    per_type_cost,
    social_cost,
    solve_equilibrium_multitype,
    solve_equilibrium_uniform,
    solve_social_optimum,
    validate_flow,
    vi_residual,
)
from cgbias.flowsolve import Instance


def braess_oracle(k):
    """u-a load at the potential minimiser when both x^2 edges are perceived as k x^2."""

    def pot(f):
        ua, bv = f[0] + f[2], f[1] + f[2]
        return k * ua**3 / 3 + k * bv**3 / 3 + f[0] + f[1]

    res = minimize(pot, [1 / 3] * 3, bounds=[(0, 1)] * 3, method="SLSQP",
                   constraints=[{"type": "eq", "fun": lambda f: f.sum() - 1}],
                   options={"ftol": 1e-15, "maxiter": 1000})
    return res.x[0] + res.x[2]


def test_pigou_equilibrium_and_optimum(cfg):
    inst = gen_pigou(1.0, 1)
    flow, cert = solve_equilibrium_uniform(inst, cfg)
    assert flow.load("e2") == pytest.approx(1.0, abs=1e-8)
    assert cert.converged
    assert social_cost(inst, flow) == pytest.approx(1.0)
    opt, sc = solve_social_optimum(inst, cfg)
    assert opt.load("e2") == pytest.approx(0.5, abs=1e-8)
    assert sc == pytest.approx(0.75, abs=1e-10)
    assert vi_residual(inst, opt) == pytest.approx(0.25, abs=1e-10)


@pytest.mark.parametrize(
    "bias,expected",
    [
        (Identity(), 1.0),
        (Tax(1.0), 1 / math.sqrt(3)),
        (Tax(0.5), 0.7071067812),  # frozen from braess_oracle(2.0)
        (Pessimism(2.0), 0.5),  # frozen from braess_oracle(4.0)
    ],
)
def test_braess_equilibria(bias, expected, cfg):
    inst = gen_braess_quadratic(bias)
    flow, _ = solve_equilibrium_multitype(inst, cfg)
    assert flow.load("u-a") == pytest.approx(expected, abs=1e-6)


def test_braess_oracle_agrees():
    assert braess_oracle(2.0) == pytest.approx(0.7071067812, abs=1e-6)
    assert braess_oracle(4.0) == pytest.approx(0.5, abs=1e-6)


def test_braess_optimum(cfg):
    _, sc = solve_social_optimum(gen_braess_quadratic(), cfg)
    x = 1 / math.sqrt(3)
    assert sc == pytest.approx(2 * x**3 + 2 * (1 - x) + 0.0, abs=1e-8)


@pytest.mark.parametrize("bias", [Identity(), Tax(1.0), Pessimism(1.5)])
def test_frank_wolfe_agrees_with_projection(bias):
    inst = gen_braess_quadratic(bias)
    a, _ = solve_equilibrium_uniform(inst, SolverConfig(tolerance=1e-9))
    b, _ = solve_equilibrium_uniform(inst, SolverConfig(tolerance=1e-7, max_iters=20000, method="frank_wolfe"))
    assert np.allclose(a.loads, b.loads, atol=2e-3)


def test_not_converged_carries_flow():
    inst = gen_braess_quadratic(Tax(0.5))
    with pytest.raises(NotConverged) as info:
        solve_equilibrium_uniform(inst, SolverConfig(tolerance=1e-14, max_iters=2, method="frank_wolfe"))
    assert info.value.flow is not None
    assert not info.value.certificate.converged


def two_type_instance():
    recipe = dsp_series(dsp_parallel(dsp_edge("a"), dsp_edge("b")), dsp_parallel(dsp_edge("c"), dsp_edge("d")))
    net = build_dsp(recipe, certify=True)
    costs = {"a": Polynomial([0, 1]), "b": Polynomial([1]), "c": Polynomial([0, 0, 1]), "d": Polynomial([0.5, 0.5])}
    types = [AgentType(net.source, net.target, 0.6, Tax(0.0)), AgentType(net.source, "n1", 0.4, Pessimism(2.0))]
    return Instance(net, costs, types, "two-type")


def test_multitype_equilibrium_conditions(cfg):
    inst = two_type_instance()
    flow, cert = solve_equilibrium_multitype(inst, cfg)
    assert cert.converged
    assert validate_flow(inst.network, inst.types, flow.per_type, 1e-8) == []
    assert vi_residual(inst, flow) < 1e-8
    loads = flow.loads
    # type 1 (n0 -> n1, pessimism 2) equalises perceived costs 2x on a and 1 on b
    costs = dict(zip(flow.edge_ids, loads))
    if flow.per_type[1][0] > 1e-9 and flow.per_type[1][1] > 1e-9:
        assert 2 * costs["a"] == pytest.approx(1.0, abs=1e-6)
    total = sum(per_type_cost(inst, flow, i) for i in range(2))
    assert total == pytest.approx(social_cost(inst, flow), rel=1e-12)
    paths = decompose_paths(inst, flow, 0)
    assert sum(paths.values()) == pytest.approx(0.6)


def test_social_optimum_not_beaten_by_equilibrium(cfg):
    inst = two_type_instance()
    flow, _ = solve_equilibrium_multitype(inst, cfg)
    _, opt = solve_social_optimum(inst, cfg)
    assert social_cost(inst, flow) >= opt - 1e-9


def test_derive_homogeneous():
    inst = two_type_instance()
    h = derive_homogeneous(inst, 1)
    assert len(h.types) == 1
    assert h.types[0].mass == pytest.approx(1.0)
    assert h.types[0].bias == Pessimism(2.0)
    assert derive_homogeneous(inst, 1, biased=False).types[0].bias == Identity()


def test_restarts_are_deterministic():
    inst = two_type_instance()
    c = SolverConfig(restarts=3, seed=7)
    a, _ = solve_equilibrium_multitype(inst, c)
    b, _ = solve_equilibrium_multitype(inst, c)
    assert a.per_type.tobytes() == b.per_type.tobytes()
