"""Equilibria, social optima and social-cost accounting for routing games.

Three engines share one shortest-path oracle:

* Frank-Wolfe on the Beckmann potential, for games where every type perceives
  the same costs and for the social optimum (the equilibrium under marginal
  costs).
* Averaged best response, the literal player-specific dynamic: every type
  moves to its cheapest perceived path and the move is blended in with weight
  ``2/(k+2)``.
* Path-based gradient projection, a Gauss-Seidel sweep over types that shifts
  flow from each used path to the type's current cheapest path by a Newton
  step.  It is the default engine everywhere: Frank-Wolfe and averaged best
  response converge sublinearly and stall on the steep exhibits.

All solvers stop on the variational-inequality residual.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .costfun import BiasedCost, BiasSpec, CostModel, Identity, Override, apply_bias
from .exceptions import InvalidFlow, NoPath, NotConverged
from .netgraph import Network, validate_flow

logger = logging.getLogger(__name__)

__all__ = [
    "AgentType",
    "Instance",
    "FlowState",
    "SolverConfig",
    "EquilibriumCertificate",
    "social_cost",
    "per_type_cost",
    "solve_equilibrium_uniform",
    "solve_equilibrium_multitype",
    "solve_social_optimum",
    "vi_residual",
    "derive_homogeneous",
    "decompose_paths",
]

EXACT_LINESEARCH = "exact_linesearch"
HARMONIC = "harmonic"


@dataclass(frozen=True)
class AgentType:
    source: object
    target: object
    mass: float = 1.0
    bias: BiasSpec = field(default_factory=Identity)
    name: Optional[str] = None

    def __post_init__(self):
        if not self.mass >= 0:
            raise ValueError(f"type mass must be nonnegative, got {self.mass}")


@dataclass(frozen=True)
class Instance:
    """A routing game with biased costs: network, true costs and agent types."""

    network: Network
    costs: Tuple[CostModel, ...]
    types: Tuple[AgentType, ...]
    name: str = ""

    def __post_init__(self):
        costs = self.costs
        if isinstance(costs, Mapping):
            missing = [e for e in self.network.edge_ids if e not in costs]
            if missing:
                raise ValueError(f"no cost for edges {missing}")
            extra = set(costs) - set(self.network.edge_ids)
            if extra:
                raise ValueError(f"costs given for unknown edges {sorted(extra)}")
            costs = tuple(costs[e] for e in self.network.edge_ids)
        costs = tuple(costs)
        if len(costs) != self.network.n_edges:
            raise ValueError("one cost model per edge is required")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise ValueError("an instance needs at least one agent type")
        nodes = set(self.network.nodes)
        for i, t in enumerate(self.types):
            if t.source not in nodes or t.target not in nodes:
                raise ValueError(f"type {i} terminals are not in the network")
            if t.mass > 0 and not self.network.reachable(t.source, t.target):
                raise NoPath(f"type {i}: {t.target!r} is unreachable from {t.source!r}")

    @property
    def total_mass(self) -> float:
        return float(sum(t.mass for t in self.types))

    @property
    def cost_map(self) -> Dict[str, CostModel]:
        return dict(zip(self.network.edge_ids, self.costs))

    @property
    def is_symmetric(self) -> bool:
        live = [t for t in self.types if t.mass > 0]
        return len({(t.source, t.target) for t in live}) <= 1

    @property
    def uniform_bias(self) -> Optional[BiasSpec]:
        biases = {t.bias for t in self.types if t.mass > 0}
        return biases.pop() if len(biases) == 1 else None

    def biased_costs(self, i: int) -> List[BiasedCost]:
        bias = self.types[i].bias
        return [apply_bias(c, bias, edge=e) for e, c in zip(self.network.edge_ids, self.costs)]

    def with_types(self, types, name=None) -> "Instance":
        return Instance(self.network, self.costs, tuple(types), self.name if name is None else name)


@dataclass(frozen=True)
class FlowState:
    """Per-type edge flows; ``paths`` optionally maps each type's paths to mass."""

    edge_ids: Tuple[str, ...]
    per_type: np.ndarray
    paths: Optional[Tuple[Dict[Tuple[str, ...], float], ...]] = None

    def __post_init__(self):
        arr = np.array(self.per_type, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != len(self.edge_ids):
            raise ValueError("per_type must have shape (n_types, n_edges)")
        arr.setflags(write=False)
        object.__setattr__(self, "per_type", arr)

    @property
    def loads(self) -> np.ndarray:
        return self.per_type.sum(axis=0)

    def load(self, edge_id: str) -> float:
        return float(self.loads[self.edge_ids.index(edge_id)])

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.edge_ids, self.loads.tolist()))


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iters: int = 5000
    step_rule: str = EXACT_LINESEARCH
    restarts: int = 1
    seed: int = 0
    method: str = "auto"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_rule not in (EXACT_LINESEARCH, HARMONIC):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.method not in ("auto", "frank_wolfe", "best_response", "projection"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class EquilibriumCertificate:
    """How close a flow is to equilibrium.

    ``vi_residual`` is absolute; convergence is declared when it falls below
    ``tolerance * max(1, perceived_total)`` so that exhibits with huge perceived
    costs are judged on the same relative scale as unit-cost ones.
    """

    vi_residual: float
    iterations: int
    converged: bool
    per_type_path_cost_spread: float
    perceived_total: float = 0.0
    method: str = ""
    residual_history: List[float] = field(default_factory=list)

    @property
    def relative_gap(self) -> float:
        return self.vi_residual / max(self.perceived_total, 1e-300)


# --- vectorised edge costs -------------------------------------------------


class _CostBank:
    """Evaluates a list of cost models on a load vector.

    Polynomial costs are packed into a coefficient matrix and evaluated by
    Horner's rule; anything else falls back to a per-edge loop.
    """

    def __init__(self, models: Sequence[CostModel]):
        self.models = list(models)
        n = len(self.models)
        poly_idx, coefs = [], []
        for j, m in enumerate(self.models):
            if type(m).__name__ == "Polynomial" or m.kind == "power":
                poly_idx.append(j)
                coefs.append(m.to_polynomial().coefficients)
        self.poly_idx = np.array(poly_idx, dtype=int)
        self.other_idx = np.array(sorted(set(range(n)) - set(poly_idx)), dtype=int)
        deg = max((len(c) for c in coefs), default=1)
        C = np.zeros((len(coefs), deg))
        for r, c in enumerate(coefs):
            C[r, : len(c)] = c
        self.C = C
        k = np.arange(1, deg)
        self.D = C[:, 1:] * k if deg > 1 else np.zeros((len(coefs), 1))
        self.I = np.hstack([np.zeros((len(coefs), 1)), C / np.arange(1, deg + 1)])
        self._pos = np.full(n, -1, dtype=int)
        self._pos[self.poly_idx] = np.arange(len(poly_idx))

    @staticmethod
    def _horner(M, x):
        acc = np.zeros_like(x)
        for k in range(M.shape[1] - 1, -1, -1):
            acc = acc * x + M[:, k]
        return acc

    def _apply(self, which, x, idx=None):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if idx is None:
            idx = np.arange(len(self.models))
        idx = np.asarray(idx, dtype=int)
        out = np.empty(len(idx))
        pos = self._pos[idx]
        is_poly = pos >= 0
        if np.any(is_poly):
            M = {"eval": self.C, "deriv": self.D, "integral": self.I}[which][pos[is_poly]]
            out[is_poly] = self._horner(M, x[is_poly])
        for k in np.flatnonzero(~is_poly):
            m = self.models[idx[k]]
            fn = {"eval": m.__call__, "deriv": m.deriv, "integral": m.integral}[which]
            out[k] = fn(float(x[k]))
        return out

    def eval(self, x, idx=None):
        return self._apply("eval", x, idx)

    def deriv(self, x, idx=None):
        return self._apply("deriv", x, idx)

    def integral(self, x, idx=None):
        return self._apply("integral", x, idx)


# --- shortest paths ----------------------------------------------------------


class _PathOracle:
    """Shortest paths under nonnegative edge weights with lexicographic ties."""

    def __init__(self, net: Network):
        self.net = net
        self.node_idx = {n: i for i, n in enumerate(net.nodes)}
        self.tail = np.array([self.node_idx[e[1]] for e in net.edges], dtype=int)
        self.head = np.array([self.node_idx[e[2]] for e in net.edges], dtype=int)
        n = len(net.nodes)
        order = sorted(range(net.n_edges), key=lambda j: net.edges[j][0])
        self.out = [[] for _ in range(n)]
        self.inc = [[] for _ in range(n)]
        for j in order:
            self.out[self.tail[j]].append(j)
            self.inc[self.head[j]].append(j)
        topo = net.topological_order()
        self.topo = None if topo is None else [self.node_idx[v] for v in topo]

    def _dist_to(self, target: int, w: np.ndarray) -> np.ndarray:
        n = len(self.out)
        d = np.full(n, math.inf)
        d[target] = 0.0
        if self.topo is not None:
            for v in reversed(self.topo):
                best = d[v]
                for j in self.out[v]:
                    cand = w[j] + d[self.head[j]]
                    if cand < best:
                        best = cand
                d[v] = best
            return d
        heap = [(0.0, target)]
        done = np.zeros(n, dtype=bool)
        while heap:
            dv, v = heapq.heappop(heap)
            if done[v]:
                continue
            done[v] = True
            for j in self.inc[v]:
                u = self.tail[j]
                cand = dv + w[j]
                if cand < d[u]:
                    d[u] = cand
                    heapq.heappush(heap, (cand, u))
        return d

    def shortest(self, source, target, w) -> Tuple[Tuple[int, ...], float]:
        s, t = self.node_idx[source], self.node_idx[target]
        w = np.asarray(w, dtype=float)
        d = self._dist_to(t, w)
        if not math.isfinite(d[s]):
            raise NoPath(f"{target!r} unreachable from {source!r}")
        path, v, seen = [], s, {s}
        while v != t:
            slack = 1e-12 * max(1.0, abs(d[v]))
            step = None
            for j in self.out[v]:
                h = self.head[j]
                if h not in seen and w[j] + d[h] <= d[v] + slack:
                    step = j
                    break
            if step is None:  # only reachable through rounding; fall back to the exact argmin
                step = min(
                    (j for j in self.out[v] if self.head[j] not in seen),
                    key=lambda j: w[j] + d[self.head[j]],
                )
            path.append(step)
            v = self.head[step]
            seen.add(v)
        return tuple(path), float(d[s])


# --- accounting ----------------------------------------------------------------


def _flow_array(inst: Instance, flow) -> np.ndarray:
    arr = flow.per_type if isinstance(flow, FlowState) else np.asarray(flow, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _check_valid(inst: Instance, arr: np.ndarray, tol=1e-7):
    problems = validate_flow(inst.network, inst.types, arr, tol=tol * max(1.0, inst.total_mass))
    if problems:
        raise InvalidFlow(problems)


def social_cost(inst: Instance, flow, check: bool = True) -> float:
    """Total true latency ``sum_e s_e c_e(s_e)``."""
    arr = _flow_array(inst, flow)
    if check:
        _check_valid(inst, arr)
    loads = np.maximum(arr.sum(axis=0), 0.0)
    return float(loads @ _CostBank(inst.costs).eval(loads))


def per_type_cost(inst: Instance, flow, i: int) -> float:
    """True latency borne by type ``i``: ``sum_e s_{i,e} c_e(s_e)``."""
    arr = _flow_array(inst, flow)
    loads = np.maximum(arr.sum(axis=0), 0.0)
    return float(arr[i] @ _CostBank(inst.costs).eval(loads))


def _banks_for(inst: Instance, perceived: Optional[str] = None) -> List[_CostBank]:
    if perceived == "true":
        bank = _CostBank(inst.costs)
        return [bank] * len(inst.types)
    if perceived == "marginal":
        bank = _CostBank([c.marginal() for c in inst.costs])
        return [bank] * len(inst.types)
    cache: Dict[BiasSpec, _CostBank] = {}
    banks = []
    for i, t in enumerate(inst.types):
        if t.bias not in cache:
            cache[t.bias] = _CostBank([bc.perceived for bc in inst.biased_costs(i)])
        banks.append(cache[t.bias])
    return banks


def _gap(inst, oracle, banks, arr, active, used_paths=None):
    loads = np.maximum(arr.sum(axis=0), 0.0)
    gap, total, spread = 0.0, 0.0, 0.0
    shortest = {}
    for i in active:
        t = inst.types[i]
        c = banks[i].eval(loads)
        p, cmin = oracle.shortest(t.source, t.target, c)
        shortest[i] = (p, cmin, c)
        used = float(c @ arr[i])
        total += used
        gap += max(used - t.mass * cmin, 0.0)
        if used_paths is not None:
            live = [q for q, f in used_paths[i].items() if f > 1e-9 * t.mass]
        else:
            live = [tuple(q) for q in _decompose_idx(oracle, t, arr[i]) if q[1] > 1e-6 * t.mass]
            live = [q[0] for q in live]
        for q in live:
            spread = max(spread, float(c[list(q)].sum()) - cmin)
    return gap, total, spread, shortest


def vi_residual(inst: Instance, flow, perceived: Optional[str] = None) -> float:
    """``sum_i [sum_e chat^i_e(s_e) s_{i,e} - n_i * (cheapest perceived path)]``."""
    arr = _flow_array(inst, flow)
    _check_valid(inst, arr)
    active = [i for i, t in enumerate(inst.types) if t.mass > 0]
    gap, *_ = _gap(inst, _PathOracle(inst.network), _banks_for(inst, perceived), arr, active)
    return gap


def _decompose_idx(oracle: _PathOracle, t: AgentType, row: np.ndarray):
    rem = np.array(row, dtype=float)
    s, target = oracle.node_idx[t.source], oracle.node_idx[t.target]
    out = []
    thresh = 1e-12 * max(t.mass, 1.0)
    for _ in range(len(row) + 1):
        path, v, seen = [], s, {s}
        while v != target:
            cands = [j for j in oracle.out[v] if rem[j] > thresh and oracle.head[j] not in seen]
            if not cands:
                path = None
                break
            j = max(cands, key=lambda j: rem[j])
            path.append(j)
            v = oracle.head[j]
            seen.add(v)
        if not path:
            break
        f = float(min(rem[path]))
        rem[path] -= f
        out.append((tuple(path), f))
    return out


def decompose_paths(inst: Instance, flow: FlowState, i: int) -> Dict[Tuple[str, ...], float]:
    """Greedy path decomposition of type ``i``'s edge flow."""
    oracle = _PathOracle(inst.network)
    ids = inst.network.edge_ids
    res = {}
    for p, f in _decompose_idx(oracle, inst.types[i], _flow_array(inst, flow)[i]):
        key = tuple(ids[j] for j in p)
        res[key] = res.get(key, 0.0) + f
    return res


# --- engines -----------------------------------------------------------------


def _initial_paths(inst, oracle, banks, active, rng):
    """All-or-nothing loading, sequential over types; randomised for restarts."""
    E = inst.network.n_edges
    arr = np.zeros((len(inst.types), E))
    paths = [dict() for _ in inst.types]
    for i in active:
        t = inst.types[i]
        loads = arr.sum(axis=0)
        c = banks[i].eval(loads)
        if rng is not None:
            c = c * rng.uniform(0.0, 2.0, E) + rng.uniform(0.0, 1.0, E) * (1.0 + float(np.mean(c)))
        p, _ = oracle.shortest(t.source, t.target, c)
        arr[i, list(p)] += t.mass
        paths[i][p] = t.mass
    return arr, paths


def _finish(inst, arr, paths, cert, cfg, method):
    ids = inst.network.edge_ids
    named = None
    if paths is not None:
        named = tuple({tuple(ids[j] for j in p): f for p, f in sorted(d.items()) if f > 0} for d in paths)
    flow = FlowState(ids, np.maximum(arr, 0.0), named)
    cert.method = method
    if not cert.converged:
        raise NotConverged(
            f"{method}: residual {cert.vi_residual:.3g} after {cert.iterations} iterations", flow, cert
        )
    return flow, cert


def _converged(gap, total, tol):
    return gap <= tol * max(1.0, total)


def _link_based(inst, cfg, banks, potential, rng=None):
    """Frank-Wolfe (with a shared potential) or averaged best response."""
    oracle = _PathOracle(inst.network)
    active = [i for i, t in enumerate(inst.types) if t.mass > 0]
    arr, _ = _initial_paths(inst, oracle, banks, active, rng)
    line_search = potential and cfg.step_rule == EXACT_LINESEARCH
    history = []
    gap = total = math.inf
    spread = math.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gap, total, _, shortest = _gap(inst, oracle, banks, arr, active, used_paths=[{}] * len(inst.types))
        history.append(gap)
        if _converged(gap, total, cfg.tolerance):
            break
        target = np.zeros_like(arr)
        for i in active:
            target[i, list(shortest[i][0])] = inst.types[i].mass
        d = target - arr
        if line_search:
            alpha = _line_search(banks[active[0]], arr.sum(axis=0), d.sum(axis=0))
        else:
            alpha = 2.0 / (it + 2.0)
        arr = arr + alpha * d
    else:
        it = cfg.max_iters
    gap, total, spread, _ = _gap(inst, oracle, banks, arr, active)
    conv = _converged(gap, total, cfg.tolerance)
    cert = EquilibriumCertificate(gap, it, conv, spread, total, residual_history=history)
    return arr, cert


def _line_search(bank, loads, direction, iters=80):
    """Root of the potential's directional derivative on [0, 1] by bisection."""
    moving = np.flatnonzero(direction != 0)
    if moving.size == 0:
        return 0.0
    x0, dv = loads[moving], direction[moving]

    def slope(a):
        return float(bank.eval(x0 + a * dv, moving) @ dv)

    if slope(1.0) <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def _projection(inst, cfg, banks, rng=None):
    """Path-based gradient projection, Gauss-Seidel over types."""
    oracle = _PathOracle(inst.network)
    active = [i for i, t in enumerate(inst.types) if t.mass > 0]
    arr, paths = _initial_paths(inst, oracle, banks, active, rng)
    loads = arr.sum(axis=0)
    history = []
    it = 0
    converged = False
    for it in range(1, cfg.max_iters + 1):
        for i in active:
            t = inst.types[i]
            bank = banks[i]
            c = bank.eval(loads)
            dc = bank.deriv(loads)
            best, _ = oracle.shortest(t.source, t.target, c)
            paths[i].setdefault(best, 0.0)
            best_set = set(best)
            for p in sorted(paths[i]):
                if p == best:
                    continue
                f = paths[i][p]
                if f <= 0:
                    continue
                diff = float(c[list(p)].sum() - c[list(best)].sum())
                if diff <= 0:
                    continue
                sym = sorted(set(p) ^ best_set)
                denom = float(dc[sym].sum())
                delta = f if denom <= 0 else min(f, diff / denom)
                only_p = [j for j in p if j not in best_set]
                only_b = [j for j in best if j not in set(p)]
                if delta >= f:
                    delta = f
                    del paths[i][p]
                else:
                    paths[i][p] = f - delta
                paths[i][best] += delta
                arr[i, only_p] -= delta
                arr[i, only_b] += delta
                loads[only_p] -= delta
                loads[only_b] += delta
                np.maximum(loads, 0.0, out=loads)
                if sym:
                    c[sym] = bank.eval(loads[sym], sym)
                    dc[sym] = bank.deriv(loads[sym], sym)
            for p in [p for p, f in paths[i].items() if f <= 0]:
                del paths[i][p]
        loads = arr.sum(axis=0)
        gap, total, _, _ = _gap(inst, oracle, banks, arr, active, used_paths=[{}] * len(inst.types))
        history.append(gap)
        if _converged(gap, total, cfg.tolerance):
            converged = True
            break
    gap, total, spread, _ = _gap(inst, oracle, banks, arr, active, used_paths=paths)
    cert = EquilibriumCertificate(gap, it, converged and _converged(gap, total, cfg.tolerance), spread, total,
                                  residual_history=history)
    return arr, paths, cert


def _run(inst, cfg, banks, potential, method, rng=None):
    if method == "projection":
        arr, paths, cert = _projection(inst, cfg, banks, rng)
        return _finish(inst, arr, paths, cert, cfg, method)
    arr, cert = _link_based(inst, cfg, banks, potential, rng)
    return _finish(inst, arr, None, cert, cfg, method)


def _require_calculus(inst, banks_models):
    for m in banks_models:
        if not m.has_calculus:
            raise ValueError("potential-based solvers need costs with derivatives and integrals")


def solve_equilibrium_uniform(inst: Instance, cfg: SolverConfig = SolverConfig()):
    """Equilibrium of a game in which every type perceives the same costs.

    Minimises the Beckmann potential of the perceived costs.  The default
    engine is path-based gradient projection; ``cfg.method = "frank_wolfe"``
    runs Frank-Wolfe with ``cfg.step_rule``.
    """
    bias = inst.uniform_bias
    if bias is None:
        raise ValueError("types disagree on their bias; use solve_equilibrium_multitype")
    if isinstance(bias, Override):
        raise ValueError("override tables carry no potential; use solve_equilibrium_multitype")
    banks = _banks_for(inst)
    _require_calculus(inst, banks[0].models)
    method = "frank_wolfe" if cfg.method in ("frank_wolfe", "best_response") else "projection"
    return _run(inst, cfg, banks, True, method)


def solve_equilibrium_multitype(inst: Instance, cfg: SolverConfig = SolverConfig()):
    """Equilibrium of a player-specific game; restarts keep the costliest one.

    The default engine is path-based gradient projection; ``cfg.method =
    "best_response"`` runs averaged best response with ``cfg.step_rule``
    (exact line search is used only when all types share a potential).
    """
    method = cfg.method
    if method == "auto":
        method = "projection"
    if method == "frank_wolfe":
        method = "best_response"
    banks = _banks_for(inst)
    potential = inst.uniform_bias is not None and all(m.has_calculus for m in banks[0].models) and not isinstance(
        inst.uniform_bias, Override
    )
    rng = np.random.default_rng(cfg.seed)
    best = None
    failures = []
    for k in range(cfg.restarts):
        try:
            flow, cert = _run(inst, cfg, banks, potential, method, rng if k else None)
        except NotConverged as exc:
            failures.append(exc)
            continue
        sc = social_cost(inst, flow, check=False)
        if best is None or sc > best[0] + 1e-12 * max(1.0, abs(sc)):
            best = (sc, flow, cert)
    if best is None:
        raise failures[-1]
    if failures:
        logger.warning("%d of %d restarts did not converge", len(failures), cfg.restarts)
    return best[1], best[2]


def solve_social_optimum(inst: Instance, cfg: SolverConfig = SolverConfig()):
    """Socially optimal flow and its cost (equilibrium under marginal costs)."""
    banks = _banks_for(inst, "marginal")
    method = "frank_wolfe" if cfg.method in ("frank_wolfe", "best_response") else "projection"
    flow, cert = _run(inst, cfg, banks, True, method)
    return flow, social_cost(inst, flow, check=False)


def derive_homogeneous(inst: Instance, i: int, biased: bool = True) -> Instance:
    """Single-type game: all mass gets type ``i``'s terminals (and bias)."""
    t = inst.types[i]
    bias = t.bias if biased else Identity()
    label = f"{inst.name}|type{i}" + ("|biased" if biased else "")
    return inst.with_types([AgentType(t.source, t.target, inst.total_mass, bias, t.name)], name=label)
