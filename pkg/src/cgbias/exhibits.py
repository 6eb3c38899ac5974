"""Generators for the named example games and for random test instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .costfun import (
    BiasSpec,
    Identity,
    MeanVar,
    Override,
    Pessimism,
    Polynomial,
    ShiftedPower,
    Tax,
)
from .exceptions import Unsupported
from .flowsolve import AgentType, Instance
from .netgraph import Network, build_dsp, dsp_edge, dsp_parallel, dsp_series
from .smoothbounds import CostClass

__all__ = [
    "ExhibitSpec",
    "gen_pigou",
    "gen_braess_quadratic",
    "meanvar_braess",
    "braess_variance",
    "gen_braess_adversarial",
    "gen_risk_unbounded",
    "risk_parameters",
    "gen_tightness",
    "tightness_coefficient",
    "random_recipe",
    "random_dsp_instance",
    "generate",
]

BRAESS_EDGES = ("u-a", "u-b", "a-v", "b-v", "a-b")


@dataclass(frozen=True)
class ExhibitSpec:
    family: str
    params: Dict = field(default_factory=dict)


def gen_pigou(a: float, d: int = 1, bias: BiasSpec = Identity(), mass: float = 1.0) -> Instance:
    """Two parallel links costing 1 and ``a x^d``."""
    if not a > 0:
        raise ValueError("a must be positive")
    if d < 1:
        raise ValueError("degree must be >= 1")
    net = build_dsp(dsp_parallel(dsp_edge("e1"), dsp_edge("e2")), certify=True)
    coef = np.zeros(d + 1)
    coef[d] = a
    costs = {"e1": Polynomial([1.0]), "e2": Polynomial(coef)}
    return Instance(net, costs, [AgentType(net.source, net.target, mass, bias)], f"pigou(a={a!r},d={d})")


def _braess_network() -> Network:
    return Network(
        ("u", "a", "b", "v"),
        (("u-a", "u", "a"), ("u-b", "u", "b"), ("a-v", "a", "v"), ("b-v", "b", "v"), ("a-b", "a", "b")),
    )


def braess_variance(scale: float = 0.5, scope: str = "quadratic") -> Dict[str, Polynomial]:
    """Variance ``scale * x`` on the load-dependent Braess edges or on all five."""
    if scope == "quadratic":
        edges = ("u-a", "b-v")
    elif scope == "all":
        edges = BRAESS_EDGES
    else:
        raise ValueError("scope must be 'quadratic' or 'all'")
    return {e: Polynomial([0.0, scale]) for e in edges}


def gen_braess_quadratic(bias: BiasSpec = Identity()) -> Instance:
    """Braess network with x^2 on u-a and b-v, 1 on u-b and a-v, 0 on a-b."""
    costs = {
        "u-a": Polynomial([0, 0, 1]),
        "u-b": Polynomial([1]),
        "a-v": Polynomial([1]),
        "b-v": Polynomial([0, 0, 1]),
        "a-b": Polynomial([0]),
    }
    return Instance(_braess_network(), costs, [AgentType("u", "v", 1.0, bias)], f"braess-quadratic[{bias.name}]")


def gen_braess_adversarial(eps: float, M_exp: int) -> Instance:
    """Braess game where a fraction ``eps`` follows private, misleading costs."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if M_exp < 1:
        raise ValueError("M_exp must be a positive integer")
    M = float(M_exp)
    steep = ShiftedPower(2.0**M_exp, M_exp)
    costs = {"u-a": steep, "u-b": Polynomial([0]), "a-v": Polynomial([0]), "b-v": steep, "a-b": Polynomial([M])}
    table = {
        "u-a": Polynomial([0]),
        "u-b": Polynomial([M]),
        "a-v": Polynomial([M]),
        "b-v": Polynomial([0]),
        "a-b": Polynomial([0]),
    }
    types = [AgentType("u", "v", 1 - eps, Identity(), "honest"), AgentType("u", "v", eps, Override(table), "misled")]
    return Instance(_braess_network(), costs, types, f"braess-adversarial(eps={eps!r},M={M_exp})")


def risk_parameters(eps: float, M: float):
    """``(q, d, a)`` with q > 2M/eps, d > max(log2 q + 1, 10) and a = (q/2)^d."""
    q = math.floor(2 * M / eps) + 1
    d = math.floor(max(math.log2(q) + 1, 10)) + 1
    return q, d, (q / 2) ** d


def gen_risk_unbounded(eps: float, M: float, size_budget: int = 200_000) -> Instance:
    """Network on which a small pessimistic minority makes the BPoA exceed ``M``.

    ``q`` disjoint three-edge paths ``s -> k1 -> k2 -> t`` (outer edges
    ``a x^d``, middle edge ``x``) plus a chain ``s -> s' -> 11 -> 12 -> 21 ->
    ... -> q2 -> t' -> t`` whose connectors cost 0 and whose two end edges cost
    the constant ``2^-d``, enough to keep unbiased agents off the chain.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    if not M >= 1:
        raise ValueError("M must be >= 1")
    q, d, a = risk_parameters(eps, M)
    if q * d > size_budget:
        raise ValueError(f"q*d = {q * d} exceeds the size budget {size_budget}")
    w = len(str(q))
    node = lambda k, j: f"{k:0{w}d}.{j}"  # noqa: E731
    nodes = ["s", "s'"] + [node(k, j) for k in range(1, q + 1) for j in (1, 2)] + ["t'", "t"]
    edges, costs = [], {}
    outer = np.zeros(d + 1)
    outer[d] = a
    end = Polynomial([2.0**-d])
    for k in range(1, q + 1):
        for eid, u, v, c in (
            (f"p{k:0{w}d}-in", "s", node(k, 1), Polynomial(outer)),
            (f"p{k:0{w}d}-mid", node(k, 1), node(k, 2), Polynomial([0, 1])),
            (f"p{k:0{w}d}-out", node(k, 2), "t", Polynomial(outer)),
        ):
            edges.append((eid, u, v))
            costs[eid] = c
    chain = [("z-s", "s", "s'", end), ("z-enter", "s'", node(1, 1), Polynomial([0]))]
    for k in range(1, q):
        chain.append((f"z{k:0{w}d}-link", node(k, 2), node(k + 1, 1), Polynomial([0])))
    chain += [("z-exit", node(q, 2), "t'", Polynomial([0])), ("z-t", "t'", "t", end)]
    for eid, u, v, c in chain:
        edges.append((eid, u, v))
        costs[eid] = c
    net = Network(tuple(nodes), tuple(edges))
    types = [
        AgentType("s", "t", 1 - eps, Pessimism(1.0), "calm"),
        AgentType("s", "t", eps, Pessimism(8.0), "pessimist"),
    ]
    return Instance(net, costs, types, f"risk-unbounded(eps={eps!r},M={M!r})")


def tightness_coefficient(cls: CostClass, bias: BiasSpec):
    """``(a, d)`` of the Pigou game on which the bound for ``(cls, bias)`` is attained."""
    if not cls.is_polynomial:
        raise Unsupported(f"no tight construction for class {cls}")
    d = cls.degree
    if isinstance(bias, Identity):
        bias = Tax(0.0)
    if isinstance(bias, Pessimism):
        if d == 1:
            bias = Tax(bias.r - 1)
        elif d == 2:
            if bias.r < 2:
                raise Unsupported("quadratic pessimism has a tight construction only for r >= 2")
            return 4.0 / bias.r**2, 2
        else:
            raise Unsupported(f"no tight pessimism construction for {cls}")
    if isinstance(bias, Tax):
        b = bias.beta
        if b <= 1:
            return 1.0 / (1 + d * b), d
        return b**d * (d + 1) ** d / (1 + d * b) ** (d + 1), d
    raise Unsupported(f"no tight construction for {bias.name} bias")


def gen_tightness(cls: CostClass, bias: BiasSpec) -> Instance:
    """Pigou instance realising the worst case of ``(cls, bias)``."""
    a, d = tightness_coefficient(cls, bias)
    return gen_pigou(a, d, bias, 1.0)


# --- random instances ------------------------------------------------------------


def random_recipe(rng: np.random.Generator, max_depth: int = 6, max_edges: int = 20, p_leaf: float = 0.3):
    """Random series-parallel recipe with at most ``max_edges`` leaves."""
    counter = iter(range(10**6))

    def grow(depth, budget):
        if depth >= max_depth or budget < 2 or (depth > 0 and rng.random() < p_leaf):
            return dsp_edge(f"e{next(counter):02d}"), 1
        left_budget = int(rng.integers(1, budget))
        a, na = grow(depth + 1, left_budget)
        b, nb = grow(depth + 1, budget - na)
        op = dsp_series if rng.random() < 0.5 else dsp_parallel
        return op(a, b), na + nb

    recipe, _ = grow(0, max_edges)
    return recipe


def _random_poly(rng, max_degree, strict=True):
    d = int(rng.integers(1, max_degree + 1))
    coef = np.where(rng.random(d + 1) < 0.6, rng.uniform(0.0, 2.0, d + 1), 0.0)
    if strict and not np.any(coef[1:] > 0):
        coef[d] = rng.uniform(0.2, 2.0)
    return Polynomial(coef)


def _random_bias(rng):
    if rng.random() < 0.5:
        return Tax(float(np.round(rng.uniform(0.0, 3.0), 3)))
    return Pessimism(float(np.round(rng.uniform(1.0, 4.0), 3)))


def random_dsp_instance(
    rng: np.random.Generator,
    max_depth: int = 6,
    max_degree: int = 3,
    n_types=(2, 4),
    max_edges: int = 16,
    symmetric: bool = False,
) -> Instance:
    """Random certified series-parallel game with strictly increasing polynomial costs.

    Types get TAX or PESSIMISM biases.  Unless ``symmetric``, each type routes
    between the terminals of a random sub-recipe along the composition tree.
    """
    recipe = random_recipe(rng, max_depth, max_edges)
    net = build_dsp(recipe, certify=True)
    costs = {e: _random_poly(rng, max_degree) for e in net.edge_ids}
    m = int(rng.integers(n_types[0], n_types[1] + 1))
    masses = rng.dirichlet(np.ones(m))
    terminals = [(net.source, net.target)]
    if not symmetric:
        terminals += _sub_terminals(net)
    types = []
    for i in range(m):
        u, v = terminals[int(rng.integers(len(terminals)))] if not symmetric else terminals[0]
        types.append(AgentType(u, v, float(masses[i]), _random_bias(rng)))
    return Instance(net, costs, types, "random-dsp")


def _sub_terminals(net: Network):
    """Node pairs (u, v) with v reachable from u, excluding trivial pairs."""
    pairs = []
    for u in net.nodes:
        for v in net.nodes:
            if u != v and net.reachable(u, v):
                pairs.append((u, v))
    return pairs


def generate(spec: ExhibitSpec) -> Instance:
    """Dispatch an :class:`ExhibitSpec` to its generator."""
    fam, p = spec.family.lower(), dict(spec.params)
    if fam == "pigou":
        return gen_pigou(float(p.get("a", 1.0)), int(p.get("d", 1)), p.get("bias", Identity()), float(p.get("mass", 1.0)))
    if fam == "braess":
        return gen_braess_quadratic(p.get("bias", Identity()))
    if fam == "adversarial":
        return gen_braess_adversarial(float(p.get("eps", 0.1)), int(p.get("M", 60)))
    if fam == "risk":
        return gen_risk_unbounded(float(p.get("eps", 0.1)), float(p.get("M", 10)))
    if fam == "tightness":
        return gen_tightness(p["cls"], p["bias"])
    raise ValueError(f"unknown exhibit family {spec.family!r}")


def meanvar_braess(gamma: float = 1.0, scope: str = "quadratic") -> Instance:
    """Braess game with risk-averse agents facing variance x/2."""
    return gen_braess_quadratic(MeanVar(gamma, braess_variance(0.5, scope)))
