import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgbias import (
    AgentType,
    DspRecipe,
    Network,
    PathExplosion,
    build_dsp,
    dsp_edge,
    dsp_parallel,
    dsp_series,
    enumerate_paths,
    random_recipe,
    validate_flow,
)


def small():
    return dsp_series(dsp_parallel(dsp_edge("a"), dsp_edge("b")), dsp_edge("c"))


def test_build_series_parallel():
    net = build_dsp(small(), certify=True)
    assert net.nodes == ("n0", "n1", "n2")
    assert net.edges == (("a", "n0", "n1"), ("b", "n0", "n1"), ("c", "n1", "n2"))
    assert (net.source, net.target) == ("n0", "n2")
    assert net.is_dsp


def test_paths_lexicographic():
    net = build_dsp(small())
    assert list(enumerate_paths(net, net.source, net.target)) == [("a", "c"), ("b", "c")]


def test_path_cap():
    net = build_dsp(small())
    with pytest.raises(PathExplosion):
        enumerate_paths(net, net.source, net.target, cap=1)


def test_bad_certificate_rejected():
    net = build_dsp(small())
    edges = net.edges[:2] + (("c", "n2", "n1"),)
    with pytest.raises(ValueError):
        Network(net.nodes, edges, small())


def test_recipe_roundtrip():
    r = small()
    assert DspRecipe.from_dict(r.to_dict()) == r
    assert r.path_count() == 2 and r.depth() == 2 and r.leaves() == ["a", "b", "c"]


def test_validate_flow():
    net = build_dsp(small())
    t = [AgentType(net.source, net.target, 1.0)]
    assert validate_flow(net, t, [[0.5, 0.5, 1.0]]) == []
    errs = validate_flow(net, t, [[0.5, 0.2, 1.0]])
    assert errs and any("conservation" in e for e in errs)
    assert validate_flow(net, t, [[-0.5, 1.5, 1.0]])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_random_recipes_are_well_formed(seed):
    r = random_recipe(np.random.default_rng(seed), max_depth=6, max_edges=14)
    net = build_dsp(r, certify=True)
    assert net.topological_order() is not None
    paths = list(enumerate_paths(net, net.source, net.target))
    assert len(paths) == r.path_count()
    used = {e for p in paths for e in p}
    assert used == set(net.edge_ids)
