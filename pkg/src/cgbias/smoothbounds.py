"""Biased-smoothness certificates, BPoA bounds and an instance auditor.

A cost ``c`` is (lam, mu)-biased-smooth with respect to a perceived cost
``chat`` when, for all loads ``x, x' >= 0``::

    c(x) x + chat(x) (x' - x) <= lam c(x') x' + mu c(x) x

and then every equilibrium of the biased game costs at most ``lam / (1 - mu)``
times the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .costfun import BiasSpec, CostModel, Identity, MeanVar, Pessimism, Tax
from .exceptions import Unsupported
from .flowsolve import (
    Instance,
    SolverConfig,
    derive_homogeneous,
    per_type_cost,
    social_cost,
    solve_equilibrium_multitype,
    solve_social_optimum,
)

__all__ = [
    "CostClass",
    "SmoothnessParams",
    "SmoothnessCheck",
    "BoundReport",
    "AuditRow",
    "AuditReport",
    "poly_mu",
    "verify_biased_smoothness",
    "fit_mu_hat",
    "fit_biased_smoothness",
    "type_params",
    "analytic_biased_smoothness",
    "bpoa_upper_bound",
    "measured_bpoa",
    "diverse_bound_sum",
    "diverse_bound_weighted",
    "adversarial_fraction_bound",
    "diverse_max_affine",
    "affine_tax_bound",
    "infer_cost_class",
    "audit_instance",
]

# Below this pessimism factor the printed (r^2/4, 0) pair fails for x^2.
QUAD_PESSIMISM_R0 = 1.0 / math.sqrt(1.0 - 4.0 / (3.0 * math.sqrt(3.0)))
RAY_FACTORS = np.arange(0.0, 8.0 + 1e-12, 0.25)


def poly_mu(d: int) -> float:
    """Smallest mu with degree-``d`` polynomials (1, mu)-smooth."""
    if d <= 0:
        return 0.0
    return d * (d + 1) ** (-(d + 1) / d)


@dataclass(frozen=True)
class CostClass:
    """A family of cost functions.

    ``kind`` is one of ``general``, ``convex``, ``affine``, ``poly`` and
    ``quadratic``; ``general``/``convex`` carry their own (lam, mu).
    """

    kind: str
    degree: Optional[int] = None
    mu: Optional[float] = None
    lam: float = 1.0

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "affine":
            object.__setattr__(self, "degree", 1)
        elif kind == "quadratic":
            object.__setattr__(self, "degree", 2)
        elif kind == "poly":
            if self.degree is None or self.degree < 1:
                raise ValueError("poly class needs a degree >= 1")
        elif kind in ("general", "convex"):
            if self.mu is None:
                raise ValueError(f"{kind} class needs its smoothness mu")
        else:
            raise ValueError(f"unknown cost class {self.kind!r}")
        if self.degree is not None and self.mu is None:
            object.__setattr__(self, "mu", poly_mu(self.degree))

    @property
    def is_polynomial(self) -> bool:
        return self.degree is not None

    @property
    def is_convex(self) -> bool:
        return self.kind != "general"

    def __str__(self):
        if self.kind == "poly":
            return f"poly({self.degree})"
        if self.kind in ("general", "convex"):
            return f"{self.kind}(mu={self.mu:g})"
        return self.kind


@dataclass(frozen=True)
class SmoothnessParams:
    lam: float
    mu: float
    domain: Tuple[float, float] = (0.0, 10.0)
    provenance: str = "given"
    alternatives: Tuple[Tuple[str, float, float], ...] = ()
    note: str = ""

    @property
    def bound(self) -> float:
        return bpoa_upper_bound(self)

    @property
    def smoothable(self) -> bool:
        return self.mu < 1


@dataclass(frozen=True)
class SmoothnessCheck:
    """Worst violation of the biased-smoothness inequality and where it occurs."""

    violation: float
    witness: Tuple[float, float]
    tolerance: float = 1e-9

    @property
    def ok(self) -> bool:
        return self.violation <= self.tolerance

    def __float__(self):
        return float(self.violation)


@dataclass
class BoundReport:
    analytic_bound: Optional[float]
    measured_bpoa: Optional[float]
    equilibrium_cost: Optional[float] = None
    optimum_cost: Optional[float] = None
    tight_instance: Optional[Instance] = None
    params: Optional[SmoothnessParams] = None

    @property
    def slack(self) -> Optional[float]:
        if self.analytic_bound is None or self.measured_bpoa is None:
            return None
        return self.analytic_bound - self.measured_bpoa


# --- numerical certification ----------------------------------------------


def _gap_fn(c, bc, lam, mu):
    def f(x, xp):
        cx = c(x)
        return cx * x + bc(x) * (xp - x) - lam * c(xp) * xp - mu * cx * x

    return f


def _refine(fun, starts, lo, hi):
    """Maximise ``fun`` locally from each start; returns (value, point)."""
    best = (-math.inf, None)
    for x0 in starts:
        res = minimize(lambda z: -fun(z[0], z[1]), np.asarray(x0, float), method="L-BFGS-B",
                       bounds=[(lo, hi), (lo, hi)])
        val = -float(res.fun)
        if val > best[0]:
            best = (val, (float(res.x[0]), float(res.x[1])))
    return best


def verify_biased_smoothness(
    c: CostModel,
    bc,
    p: SmoothnessParams,
    grid: int = 201,
    refine: bool = True,
    rays: bool = True,
    tolerance: float = 1e-9,
) -> SmoothnessCheck:
    """Largest value of ``c(x)x + chat(x)(x'-x) - lam c(x')x' - mu c(x)x``.

    Searched on a ``grid x grid`` lattice over ``p.domain`` squared, refined
    locally around the best lattice points, and along the rays ``x' = k x``
    for ``k`` in {0, 1/4, ..., 8}.  On rays the value is divided by
    ``max(1, c(x)x + c(x')x')`` since those points leave the box.
    """
    if grid < 2:
        raise ValueError("grid needs at least 2 points per axis")
    lo, hi = p.domain
    xs = np.linspace(lo, hi, grid)
    cx = np.asarray(c(xs), dtype=float)
    hx = np.asarray(bc(xs), dtype=float)
    F = (cx * xs + hx * -xs)[:, None] + hx[:, None] * xs[None, :] - p.lam * (cx * xs)[None, :] - p.mu * (cx * xs)[:, None]
    k = int(np.argmax(F))
    i, j = divmod(k, grid)
    worst, witness = float(F[i, j]), (float(xs[i]), float(xs[j]))
    if refine:
        fun = _gap_fn(c, bc, p.lam, p.mu)
        top = np.argsort(F, axis=None)[-5:]
        starts = [(xs[t // grid], xs[t % grid]) for t in top]
        val, pt = _refine(fun, starts, lo, hi)
        if val > worst:
            worst, witness = val, pt
    if rays:
        xr = np.linspace(lo, hi, 401)[1:]
        cr, hr = np.asarray(c(xr), float), np.asarray(bc(xr), float)
        for kf in RAY_FACTORS:
            xp = kf * xr
            cp = np.asarray(c(xp), float)
            val = cr * xr + hr * (xp - xr) - p.lam * cp * xp - p.mu * cr * xr
            val = val / np.maximum(1.0, cr * xr + cp * xp)
            m = int(np.argmax(val))
            if val[m] > worst:
                worst, witness = float(val[m]), (float(xr[m]), float(xp[m]))
    return SmoothnessCheck(worst, witness, tolerance)


def fit_mu_hat(
    c: CostModel,
    bc,
    lam: float = 1.0,
    domain: Tuple[float, float] = (0.0, 10.0),
    grid: int = 201,
    refine: bool = True,
) -> SmoothnessParams:
    """Smallest mu making the inequality hold with the given lam on the domain.

    ``mu = sup (c(x)x + chat(x)(x'-x) - lam c(x')x') / (c(x)x)`` over points
    with ``c(x)x > 0``; negative values are clamped to 0.
    """
    lo, hi = domain
    xs = np.linspace(lo, hi, grid)
    cx = np.asarray(c(xs), float)
    hx = np.asarray(bc(xs), float)
    base = cx * xs
    live = base > 0
    if not np.any(live):
        raise ValueError("c(x)x vanishes on the whole domain")
    num = (base - hx * xs)[:, None] + hx[:, None] * xs[None, :] - lam * base[None, :]
    ratio = np.full_like(num, -np.inf)
    ratio[live] = num[live] / base[live, None]
    k = int(np.argmax(ratio))
    mu = float(ratio.flat[k])
    if refine:
        def fun(x, xp):
            cxx = float(c(x)) * x
            if cxx <= 1e-300:
                return -np.inf
            return (cxx + float(bc(x)) * (xp - x) - lam * float(c(xp)) * xp) / cxx

        top = np.argsort(ratio, axis=None)[-5:]
        starts = [(max(xs[t // grid], lo + 1e-9 * (hi - lo)), xs[t % grid]) for t in top]
        best = mu
        for x0 in starts:
            res = minimize(lambda z: -fun(z[0], z[1]), np.asarray(x0, float), method="L-BFGS-B",
                           bounds=[(lo + 1e-12 * (hi - lo) + 1e-300, hi), (lo, hi)])
            if np.isfinite(res.fun) and -res.fun > best:
                best = -float(res.fun)
        mu = best
    note = ""
    if mu < 0:
        note = f"fitted mu {mu:.3g} < 0 reported as 0"
        mu = 0.0
    if mu >= 1:
        note = "unsmoothable at this lambda"
    return SmoothnessParams(lam, mu, (lo, hi), f"FITTED(grid={grid},domain={lo:g}..{hi:g})", note=note)


# --- closed forms ----------------------------------------------------------


def _tax_candidates(cls: CostClass, beta: float):
    mu = cls.mu
    lam = cls.lam
    out = []
    if beta <= 1:
        out.append(("general:beta<=1", beta + (1 - beta) * lam, (1 - beta) * mu))
    if beta >= 1:
        out.append(("general:beta>=1", beta, 0.0))
        if cls.is_convex:
            out.append(("convex:beta>=1", 1 + (beta - 1) * mu, 0.0))
    if cls.is_polynomial:
        d = cls.degree
        if beta <= 1:
            out.append((f"poly({d}):beta<=1", 1.0, d * ((1 + d * beta) / (1 + d)) ** ((d + 1) / d) - d * beta))
        if beta >= 1:
            out.append((f"poly({d}):beta>=1", (1 + d * beta) ** (d + 1) / (beta**d * (d + 1) ** (d + 1)), 0.0))
    return out


def _pick(cands, domain):
    def score(t):
        return t[1] / (1 - t[2]) if t[2] < 1 else math.inf

    best = min(cands, key=score)
    return SmoothnessParams(best[1], best[2], domain, f"ANALYTIC({best[0]})", tuple(cands))


def analytic_biased_smoothness(cls: CostClass, bias: BiasSpec, domain=(0.0, 10.0)) -> SmoothnessParams:
    """Sharpest closed-form (lam_hat, mu_hat) for a cost class under a bias.

    Raises ``Unsupported`` when no closed form covers the pair, including
    quadratic pessimism with ``1.82 < r < QUAD_PESSIMISM_R0``.
    """
    if isinstance(bias, Identity) or (isinstance(bias, Pessimism) and bias.r == 1):
        bias = Tax(0.0)
    if isinstance(bias, Tax):
        return _pick(_tax_candidates(cls, bias.beta), domain)
    if isinstance(bias, Pessimism):
        r = bias.r
        if cls.degree == 1:
            cands = _tax_candidates(cls, r - 1)
            return _pick([(f"pessimism-as-tax({r - 1:g}):" + t, a, b) for t, a, b in cands], domain)
        if cls.degree == 2:
            if r <= 1.82:
                return _pick([("quadratic-pessimism:r<=1.82", 1.0, 0.842 - 0.457 * r)], domain)
            if r >= QUAD_PESSIMISM_R0:
                return _pick([("quadratic-pessimism:r>=2", r * r / 4, 0.0)], domain)
            raise Unsupported(
                f"no certificate for quadratic pessimism at r={r:g}; "
                f"closed forms cover r <= 1.82 and r >= {QUAD_PESSIMISM_R0:.4f}"
            )
        raise Unsupported(f"no pessimism certificate for class {cls}")
    if isinstance(bias, MeanVar):
        if bias.kappa is None:
            raise Unsupported("mean-variance certificate needs a declared kappa")
        gk = bias.gamma * bias.kappa
        return _pick([("meanvar", (1 + gk) * cls.lam, cls.mu)], domain)
    raise Unsupported(f"no closed form for {bias.name} bias on class {cls}")


def bpoa_upper_bound(p: SmoothnessParams) -> float:
    """``lam / (1 - mu)``; infinite when ``mu >= 1``."""
    if p.mu >= 1:
        return math.inf
    return p.lam / (1.0 - p.mu)


def affine_tax_bound(beta: float) -> float:
    """Tight worst-case BPoA of affine games under uniform tax sensitivity."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if beta <= 1:
        return 4.0 / (4.0 * (beta + 1) - (beta + 1) ** 2)
    return (1 + beta) ** 2 / (4 * beta)


# --- measured ratios ----------------------------------------------------------


def measured_bpoa(
    inst: Instance, cfg: SolverConfig = SolverConfig(), params: Optional[SmoothnessParams] = None
) -> BoundReport:
    """Equilibrium cost of the biased game over the optimal true cost."""
    eq, _ = solve_equilibrium_multitype(inst, cfg)
    opt_cfg = SolverConfig(cfg.tolerance, cfg.max_iters, cfg.step_rule, 1, cfg.seed, cfg.method)
    _, opt = solve_social_optimum(inst, opt_cfg)
    sc = social_cost(inst, eq)
    ratio = sc / opt if opt > 0 else (1.0 if sc <= 0 else math.inf)
    return BoundReport(None if params is None else params.bound, ratio, sc, opt, inst, params)


# --- diverse populations --------------------------------------------------------


def diverse_bound_sum(params: Sequence[SmoothnessParams]) -> float:
    """Fraction-independent bound: sum of the per-type bounds."""
    if not params:
        raise ValueError("at least one type is required")
    return float(sum(bpoa_upper_bound(p) for p in params))


def diverse_bound_weighted(base: SmoothnessParams, biased: Sequence[Tuple[float, float, float, float, float]]) -> float:
    """Fraction-dependent bound for symmetric convex series-parallel games.

    ``biased`` holds ``(n_i, lam_i, mu_i, lam_hat_i, mu_hat_i)`` per type, where
    (lam_i, mu_i) is the smoothness of the perceived costs themselves.
    """
    lam, mu = base.lam, base.mu
    if mu >= 0.5:
        raise Unsupported("fraction-dependent bound needs mu < 1/2")
    if not biased:
        raise ValueError("at least one type is required")
    n = sum(t[0] for t in biased)
    if n <= 0:
        raise ValueError("total mass must be positive")
    total = 0.0
    for n_i, lam_i, mu_i, lh, mh in biased:
        if mu_i >= 1 or mh >= 1:
            return math.inf
        total += (n_i / n) * lam * lam_i * lh / ((1 - 2 * mu) * (1 - mu_i) * (1 - mh))
    return total


def adversarial_fraction_bound(p: SmoothnessParams, alpha: float) -> float:
    """How much a fraction ``alpha`` of other agents can hurt type ``i``."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    return bpoa_upper_bound(p) / (1.0 - alpha)


def diverse_max_affine(betas: Sequence[float]) -> float:
    """Worst-case bound for affine games with mixed tax sensitivities."""
    betas = list(betas)
    if not betas:
        raise ValueError("betas must not be empty")
    if all(b <= 1 for b in betas) or all(b >= 1 for b in betas):
        return max(affine_tax_bound(b) for b in betas)
    return 4.0 / 3.0 * affine_tax_bound(max(betas))


# --- auditing -----------------------------------------------------------------------


def infer_cost_class(inst: Instance) -> CostClass:
    """Smallest polynomial class containing every edge cost."""
    degree = 0
    for c in inst.costs:
        if not c.is_polynomial:
            raise Unsupported(f"{c.kind} costs have no cost class")
        degree = max(degree, c.to_polynomial().degree)
    return CostClass("poly", max(degree, 1)) if degree != 1 else CostClass("affine")


def fit_biased_smoothness(pairs, lams=None, domain=(0.0, 10.0), grid: int = 201) -> SmoothnessParams:
    """Fitted (lam, mu) valid for every ``(c, chat)`` pair with the smallest bound.

    For each candidate lam the fitted mu is the max over pairs of the grid
    supremum; the lam giving the smallest ``lam / (1 - mu)`` wins and its mu is
    then refined locally.
    """
    lams = np.geomspace(1.0, 64.0, 49) if lams is None else np.asarray(lams, float)
    lo, hi = domain
    xs = np.linspace(lo, hi, grid)
    mats, kept = [], []
    for c, bc in pairs:
        cx = np.asarray(c(xs), float)
        hx = np.asarray(bc(xs), float)
        base = cx * xs
        live = base > 0
        if not np.any(live):
            continue
        kept.append((c, bc))
        A = (base - hx * xs)[live, None] + hx[live, None] * xs[None, :]
        mats.append((A / base[live, None], base[None, :] / base[live, None]))
    if not mats:
        raise ValueError("every cost vanishes on the domain")
    def scan(lams):
        mus = np.array([max(float(np.max(A - lam * B)) for A, B in mats) for lam in lams])
        mus = np.maximum(mus, 0.0)
        with np.errstate(over="ignore", divide="ignore"):
            return np.where(mus < 1, lams / np.maximum(1 - mus, 1e-300), np.inf)

    bounds = scan(lams)
    if not np.any(np.isfinite(bounds)):
        # steep perceived costs (high degree, strong bias) need a much larger lam
        lams = np.geomspace(lams[-1], lams[-1] * 1e16, 129)
        bounds = scan(lams)
    k = int(np.argmin(bounds))
    lam = float(lams[k])
    mu = max(fit_mu_hat(c, bc, lam, domain, grid).mu for c, bc in kept)
    return SmoothnessParams(lam, mu, domain, f"FITTED(lam grid, grid={grid},domain={lo:g}..{hi:g})")


def type_params(inst: Instance, i: int, cls: Optional[CostClass] = None, domain=(0.0, 10.0)) -> SmoothnessParams:
    """Analytic certificate for type ``i`` when one exists, else a fitted one."""
    cls = cls or infer_cost_class(inst)
    bias = inst.types[i].bias
    try:
        return analytic_biased_smoothness(cls, bias, domain)
    except Unsupported:
        pass
    pairs = [(bc.base, bc.perceived) for bc in inst.biased_costs(i) if bc.base.is_polynomial]
    return fit_biased_smoothness(pairs, domain=domain)


@dataclass
class AuditRow:
    check: str
    status: str
    slack: Optional[float] = None
    detail: str = ""


@dataclass
class AuditReport:
    rows: List[AuditRow] = field(default_factory=list)
    measured: Optional[float] = None

    def add(self, check, ok=None, slack=None, detail="", skip=None):
        status = "SKIPPED" if skip else ("PASS" if ok else "FAIL")
        self.rows.append(AuditRow(check, status, slack, skip or detail))

    @property
    def failed(self) -> List[AuditRow]:
        return [r for r in self.rows if r.status == "FAIL"]

    @property
    def passed(self) -> bool:
        return not self.failed

    def table(self) -> str:
        lines = [f"{'check':44s} {'status':8s} {'slack':>12s}  detail"]
        for r in self.rows:
            s = "" if r.slack is None else f"{r.slack:12.4g}"
            lines.append(f"{r.check:44s} {r.status:8s} {s:>12s}  {r.detail}")
        return "\n".join(lines)


def audit_instance(
    inst: Instance,
    cfg: SolverConfig = SolverConfig(),
    cls: Optional[CostClass] = None,
    tol: float = 1e-6,
    grid: int = 201,
) -> AuditReport:
    """Check the per-type lemmas and diverse-population bounds on solved flows."""
    rep = AuditReport()
    live = [i for i, t in enumerate(inst.types) if t.mass > 0]
    try:
        cls = cls or infer_cost_class(inst)
    except Unsupported:
        cls = None
    params = {}
    if cls is not None:
        for i in live:
            try:
                params[i] = type_params(inst, i, cls)
            except (Unsupported, ValueError) as exc:
                rep.add(f"params[type {i}]", skip=str(exc))
    n = inst.total_mass

    eq, _ = solve_equilibrium_multitype(inst, cfg)
    sc = social_cost(inst, eq)
    _, opt = solve_social_optimum(inst, cfg)
    rep.measured = sc / opt if opt > 0 else math.inf
    rep.add("measured BPoA >= 1", rep.measured >= 1 - tol, rep.measured - 1, f"{rep.measured:.6g}")

    xs = np.linspace(0.0, max(n, 1e-9), grid)[1:]
    for i in live:
        p = params.get(i)
        if p is None or not p.smoothable:
            why = "no smoothness parameters" if p is None else "parameters not smoothable (mu_hat >= 1)"
            rep.add(f"chat/c >= 1-mu_hat [type {i}]", skip=why)
            rep.add(f"chat/c* <= lam_hat [type {i}]", skip=why)
            continue
        low = high = math.inf
        for bc in inst.biased_costs(i):
            c = bc.base
            if not c.has_calculus:
                continue
            cv = np.asarray(c(xs), float)
            hv = np.asarray(bc.perceived(xs), float)
            star = np.asarray(c.marginal()(xs), float)
            pos = cv > 0
            if np.any(pos):
                low = min(low, float(np.min(hv[pos] / cv[pos] - (1 - p.mu))))
            pos = star > 0
            if np.any(pos):
                high = min(high, float(np.min(p.lam - hv[pos] / star[pos])))
        rep.add(f"chat/c >= 1-mu_hat [type {i}]", low >= -tol, low, p.provenance)
        rep.add(f"chat/c* <= lam_hat [type {i}]", high >= -tol, high, p.provenance)

    if cls is not None and cls.is_convex and cls.mu < 0.5:
        worst = math.inf
        for c in inst.costs:
            cv = np.asarray(c(xs), float)
            star = np.asarray(c.marginal()(xs), float)
            worst = min(worst, float(np.min(cls.lam / (1 - 2 * cls.mu) * cv - star)))
        rep.add("star_convex c* <= lam/(1-2mu) c", worst >= -tol * max(1.0, n), worst, str(cls))
    else:
        rep.add("star_convex c* <= lam/(1-2mu) c", skip="needs convex costs with mu < 1/2")

    dsp = inst.network.is_dsp
    sym = inst.is_symmetric
    per_type = {}
    for i in live:
        g_hat = derive_homogeneous(inst, i, biased=True)
        s_i, _ = solve_equilibrium_multitype(g_hat, cfg)
        _, opt_i = solve_social_optimum(derive_homogeneous(inst, i, biased=False), cfg)
        per_type[i] = (s_i, social_cost(g_hat, s_i), opt_i)

    for i in live:
        s_i, sc_i_hat, opt_i = per_type[i]
        sc_i = per_type_cost(inst, eq, i)
        label = f"type {i}"
        if not dsp:
            rep.add(f"edge monotonicity [{label}]", skip="no series-parallel certificate")
            rep.add(f"fraction-independent [{label}]", skip="no series-parallel certificate")
            continue
        used = eq.per_type[i] > 1e-7
        gap = s_i.loads[used] - eq.loads[used]
        slack = float(np.min(gap)) if gap.size else 0.0
        rep.add(f"edge monotonicity [{label}]", slack >= -tol, slack, f"{int(used.sum())} used edges")
        slack = sc_i_hat - sc_i
        rep.add(f"SC_i(s*) <= SC(s^i) [{label}]", slack >= -tol * max(1.0, sc_i_hat), slack)
        p = params.get(i)
        if p is None:
            rep.add(f"fraction-independent [{label}]", skip="no smoothness parameters")
        else:
            bound = p.bound * opt_i
            rep.add(f"fraction-independent [{label}]", sc_i <= bound + tol * max(1.0, bound), bound - sc_i)
        if cls is not None and cls.is_convex and cls.mu < 0.5 and p is not None:
            mu_i = cls.mu
            f = (inst.types[i].mass / n) * cls.lam * p.lam / ((1 - 2 * cls.mu) * (1 - mu_i) * (1 - p.mu))
            bound = f * opt_i
            rep.add(f"fraction-dependent [{label}]", sc_i <= bound + tol * max(1.0, bound), bound - sc_i)
        else:
            rep.add(f"fraction-dependent [{label}]", skip="needs convex costs with mu < 1/2")

    if dsp and sym and len(params) == len(live):
        b_sum = diverse_bound_sum([params[i] for i in live])
        rep.add("diverse bound (sum)", rep.measured <= b_sum + tol, b_sum - rep.measured, f"bound {b_sum:.6g}")
        if cls is not None and cls.is_convex and cls.mu < 0.5:
            rows = [(inst.types[i].mass, cls.lam, cls.mu, params[i].lam, params[i].mu) for i in live]
            b_w = diverse_bound_weighted(SmoothnessParams(cls.lam, cls.mu), rows)
            rep.add("diverse bound (weighted)", rep.measured <= b_w + tol, b_w - rep.measured, f"bound {b_w:.6g}")
        else:
            rep.add("diverse bound (weighted)", skip="needs convex costs with mu < 1/2")
    else:
        why = "no series-parallel certificate" if not dsp else ("asymmetric demand" if not sym else "missing parameters")
        rep.add("diverse bound (sum)", skip=why)
        rep.add("diverse bound (weighted)", skip=why)
    return rep
