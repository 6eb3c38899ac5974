"""``cgbias`` command-line interface.

Exit codes: 0 success, 1 input error, 2 solver did not converge, 3 a check
failed (audit or smoothness verification).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from . import io as docio
from .costfun import (
    BiasSpec,
    Capacity,
    Identity,
    MeanVar,
    Pessimism,
    Polynomial,
    Tax,
    apply_bias,
)
from .exceptions import NotConverged, PathExplosion, Unsupported
from .exhibits import (
    gen_braess_adversarial,
    gen_braess_quadratic,
    gen_pigou,
    gen_risk_unbounded,
    gen_tightness,
    meanvar_braess,
)
from .flowsolve import (
    AgentType,
    Instance,
    SolverConfig,
    per_type_cost,
    social_cost,
    solve_equilibrium_multitype,
    solve_social_optimum,
    vi_residual,
)
from .smoothbounds import (
    CostClass,
    SmoothnessParams,
    analytic_biased_smoothness,
    audit_instance,
    diverse_bound_sum,
    fit_mu_hat,
    infer_cost_class,
    measured_bpoa,
    type_params,
    verify_biased_smoothness,
)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3

SWEEP_COLUMNS = ("param", "analytic_bound", "measured_bpoa", "slack")

log = logging.getLogger("cgbias")


class InputError(ValueError):
    pass


# --- argument parsing helpers ---------------------------------------------------


def parse_bias(text: str) -> BiasSpec:
    """``identity``, ``tax:B``, ``pessimism:R``, ``meanvar:GAMMA:KAPPA`` or ``capacity:L:DELTA:M``.

    The mean-variance form uses variance ``KAPPA * c`` on every edge.
    """
    name, *args = text.strip().lower().split(":")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise InputError(f"bad bias parameters in {text!r}") from None
    arity = {"identity": 0, "tax": 1, "pessimism": 1, "meanvar": 2, "capacity": 3}
    if name not in arity:
        raise InputError(f"unknown bias {name!r}; expected one of {', '.join(arity)}")
    if len(vals) != arity[name]:
        raise InputError(f"bias {name!r} takes {arity[name]} parameter(s)")
    if name == "identity":
        return Identity()
    if name == "tax":
        return Tax(vals[0])
    if name == "pessimism":
        return Pessimism(vals[0])
    if name == "meanvar":
        return MeanVar(vals[0], _ScaledVariance(vals[1]), vals[1])
    return Capacity(*vals)


class _ScaledVariance(dict):
    """Marker mapping: variance proportional to each edge's own cost."""

    def __init__(self, kappa):
        super().__init__()
        self.kappa = kappa


def _bind_variance(bias: BiasSpec, inst_costs) -> BiasSpec:
    if isinstance(bias, MeanVar) and isinstance(bias.variance, _ScaledVariance):
        k = bias.variance.kappa
        table = {e: Polynomial(k * c.to_polynomial().coefficients) for e, c in inst_costs.items()}
        return MeanVar(bias.gamma, table, bias.kappa)
    return bias


def parse_class(text: str) -> CostClass:
    text = text.strip().lower()
    if text in ("affine", "quadratic"):
        return CostClass(text)
    if text.startswith("poly:"):
        try:
            return CostClass("poly", int(text[5:]))
        except ValueError:
            raise InputError(f"bad degree in {text!r}") from None
    raise InputError(f"unknown class {text!r}; expected affine, quadratic or poly:D")


def parse_cost(text: str):
    """A JSON cost descriptor or a comma-separated coefficient list ``a0,a1,...``."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return docio.cost_from_dict(json.loads(text), "--cost")
        except json.JSONDecodeError as exc:
            raise InputError(f"--cost: {exc}") from None
    try:
        return Polynomial([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise InputError(f"--cost: {exc}") from None


def _class_representative(cls: CostClass) -> Polynomial:
    coef = np.zeros(cls.degree + 1)
    coef[cls.degree] = 1.0
    return Polynomial(coef)


def _domain(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise InputError("--domain must look like LO,HI") from None
    if not hi > lo:
        raise InputError("--domain needs HI > LO")
    return lo, hi


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> SolverConfig:
    return SolverConfig(
        tolerance=args.tol, max_iters=args.max_iters, restarts=args.restarts, seed=args.seed, method=args.method
    )


def _load(path) -> Instance:
    try:
        return docio.load(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except docio.DocumentError as exc:
        raise InputError(f"{path}: {exc}") from None


def _unbiased(inst: Instance) -> Instance:
    types = [AgentType(t.source, t.target, t.mass, Identity(), t.name) for t in inst.types]
    return inst.with_types(types, name=inst.name)


# --- commands -----------------------------------------------------------------------


def _flow_report(inst, flow, title) -> List[str]:
    lines = [f"# {title}: {inst.name}", "edge\tload"]
    for eid, x in flow.as_dict().items():
        lines.append(f"{eid}\t{x:.10f}")
    return lines


def cmd_solve(args) -> int:
    inst = _load(args.file)
    if not args.biased:
        inst = _unbiased(inst)
    flow, cert = solve_equilibrium_multitype(inst, _config(args))
    lines = _flow_report(inst, flow, "biased equilibrium" if args.biased else "unbiased equilibrium")
    lines.append("type\tmass\tbias\tcost")
    for i, t in enumerate(inst.types):
        label = t.name if t.name is not None else str(i)
        lines.append(f"{label}\t{t.mass:.10g}\t{t.bias.name}\t{per_type_cost(inst, flow, i):.10f}")
    lines.append(f"SC\t{social_cost(inst, flow):.10f}")
    lines.append(f"VI residual\t{vi_residual(inst, flow):.3e}")
    lines.append(f"iterations\t{cert.iterations}\t{cert.method}")
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_opt(args) -> int:
    inst = _load(args.file)
    flow, sc = solve_social_optimum(inst, _config(args))
    lines = _flow_report(inst, flow, "social optimum")
    lines.append(f"SC\t{sc:.10f}")
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def analytic_bound(inst: Instance):
    """``(bound, note)`` for an instance: a closed form, a diverse bound, or a reason why not."""
    live = [i for i, t in enumerate(inst.types) if t.mass > 0]
    try:
        cls = infer_cost_class(inst)
    except Unsupported as exc:
        return None, str(exc)
    if inst.uniform_bias is not None:
        try:
            p = analytic_biased_smoothness(cls, inst.uniform_bias)
        except Unsupported as exc:
            return None, str(exc)
        return p.bound, p.provenance
    if not (inst.network.is_dsp and inst.is_symmetric):
        return math.inf, "unbounded (not DSPG)"
    try:
        params = [type_params(inst, i, cls) for i in live]
    except (Unsupported, ValueError) as exc:
        return None, str(exc)
    return diverse_bound_sum(params), "diverse (sum over types)"


def cmd_bpoa(args) -> int:
    inst = _load(args.file)
    rep = measured_bpoa(inst, _config(args))
    bound, note = analytic_bound(inst)
    if bound is None:
        shown = f"n/a ({note})"
    elif math.isinf(bound):
        shown = note
    else:
        shown = f"{bound:.6f} [{note}]"
    slack = None if bound is None or math.isinf(bound) else bound - rep.measured_bpoa
    lines = [
        f"# BPoA: {inst.name}",
        f"equilibrium SC\t{rep.equilibrium_cost:.10g}",
        f"optimum SC\t{rep.optimum_cost:.10g}",
        f"measured BPoA\t{rep.measured_bpoa:.6f}",
        f"analytic bound\t{shown}",
        "measured_bpoa,analytic_bound,slack",
        f"{_fmt(rep.measured_bpoa)},{'inf' if bound is not None and math.isinf(bound) else _fmt(bound)},{_fmt(slack)}",
    ]
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def _sweep_params(lo, hi, step):
    if not step > 0:
        raise InputError("--step must be positive")
    if hi < lo:
        raise InputError("--to must not be below --from")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(n)]


def sweep_row(cls: CostClass, family: str, value: float, cfg: SolverConfig):
    """``(param, analytic_bound, measured_bpoa, slack)``; unavailable entries are None."""
    bias = Tax(value) if family == "tax" else Pessimism(value)
    try:
        bound = analytic_biased_smoothness(cls, bias).bound
    except Unsupported:
        bound = None
    try:
        inst = gen_tightness(cls, bias)
    except Unsupported:
        return value, bound, None, None
    measured = measured_bpoa(inst, cfg).measured_bpoa
    slack = None if bound is None else bound - measured
    return value, bound, measured, slack


def sweep_threads() -> int:
    raw = os.environ.get("CGBIAS_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"CGBIAS_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise InputError("CGBIAS_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def sweep_csv(rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_sweep_csv(text: str):
    rows = []
    reader = csv.reader(_io.StringIO(text))
    header = next(reader)
    if tuple(header) != SWEEP_COLUMNS:
        raise InputError(f"unexpected sweep header {header}")
    for rec in reader:
        rows.append(tuple(float(v) if v else None for v in rec))
    return rows


def cmd_sweep(args) -> int:
    cls = parse_class(args.cls)
    family = args.bias_family.lower()
    if family not in ("tax", "pessimism"):
        raise InputError(f"unsupported bias family {family!r}; supported: tax, pessimism")
    values = _sweep_params(args.start, args.stop, args.step)
    cfg = _config(args)
    with ThreadPoolExecutor(max_workers=min(sweep_threads(), len(values))) as pool:
        rows = list(pool.map(lambda v: sweep_row(cls, family, v, cfg), values))
    _emit(args, sweep_csv(rows))
    return EXIT_OK


def cmd_smooth(args) -> int:
    if (args.cls is None) == (args.cost is None):
        raise InputError("give exactly one of --class or --cost")
    cls = parse_class(args.cls) if args.cls else None
    cost = parse_cost(args.cost) if args.cost else _class_representative(cls)
    bias = _bind_variance(parse_bias(args.bias), {"e": cost})
    bc = apply_bias(cost, bias, "e").perceived
    domain = _domain(args.domain)
    lines = [f"# smoothness: cost={cost!r} bias={args.bias}"]
    if args.action == "fit":
        p = fit_mu_hat(cost, bc, args.lam if args.lam is not None else 1.0, domain, args.grid)
        lines.append(f"lambda_hat\t{p.lam:.6f}")
        lines.append(f"mu_hat\t{p.mu:.6f}")
        lines.append(f"bound\t{p.bound:.6f}" if p.smoothable else "bound\tinf")
        if p.note:
            lines.append(f"note\t{p.note}")
        _emit(args, "\n".join(lines) + "\n")
        return EXIT_OK
    if args.lam is None or args.mu is None:
        if cls is None:
            raise InputError("verify with --cost needs --lambda and --mu")
        try:
            ap = analytic_biased_smoothness(cls, bias, domain)
        except Unsupported as exc:
            raise InputError(f"no analytic certificate: {exc}; pass --lambda and --mu") from None
        lam = ap.lam if args.lam is None else args.lam
        mu = ap.mu if args.mu is None else args.mu
    else:
        lam, mu = args.lam, args.mu
    p = SmoothnessParams(lam, mu, domain, "cli")
    chk = verify_biased_smoothness(cost, bc, p, grid=args.grid, tolerance=args.tol)
    status = "PASS" if chk.ok else "FAIL"
    lines.append(f"certificate\t({lam:.6g}, {mu:.6g})")
    lines.append(f"{status}\tviolation={chk.violation:.3e}\twitness=({chk.witness[0]:.6g}, {chk.witness[1]:.6g})")
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK if chk.ok else EXIT_CHECK_FAILED


def cmd_audit(args) -> int:
    inst = _load(args.file)
    rep = audit_instance(inst, _config(args))
    text = f"# audit: {inst.name}\n{rep.table()}\n"
    text += f"result\t{'PASS' if rep.passed else 'FAIL'}\t{len(rep.failed)} failed\n"
    _emit(args, text)
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _kv(pairs: Sequence[str]):
    out = {}
    for p in pairs:
        if "=" not in p:
            raise InputError(f"parameter {p!r} is not key=value")
        k, v = p.split("=", 1)
        out[k.strip().lower()] = v.strip()
    return out


def _num(p, key, default, cast=float):
    try:
        return cast(p.pop(key)) if key in p else default
    except ValueError:
        raise InputError(f"parameter {key}={p[key]!r} is not a number") from None


GENERATORS = ("pigou", "braess", "meanvar-braess", "adversarial", "risk", "tightness")


def generate_instance(family: str, params) -> Instance:
    fam = family.lower()
    p = dict(params)
    if fam == "pigou":
        bias = parse_bias(p.pop("bias", "identity"))
        a, d, mass = _num(p, "a", 1.0), _num(p, "d", 1, int), _num(p, "mass", 1.0)
        inst = gen_pigou(a, d, Identity(), mass)
        inst = inst.with_types([AgentType(inst.network.source, inst.network.target, mass, _bind_variance(bias, inst.cost_map))], name=inst.name)
    elif fam == "braess":
        bias = parse_bias(p.pop("bias", "identity"))
        inst = gen_braess_quadratic(Identity())
        inst = inst.with_types([AgentType("u", "v", 1.0, _bind_variance(bias, inst.cost_map))], name=inst.name.replace("identity", bias.name))
    elif fam == "meanvar-braess":
        inst = meanvar_braess(_num(p, "gamma", 1.0), p.pop("scope", "quadratic"))
    elif fam == "adversarial":
        inst = gen_braess_adversarial(_num(p, "eps", 0.1), _num(p, "m", 60, int))
    elif fam == "risk":
        inst = gen_risk_unbounded(_num(p, "eps", 0.1), _num(p, "m", 10.0))
    elif fam == "tightness":
        inst = gen_tightness(parse_class(p.pop("class", "affine")), parse_bias(p.pop("bias", "identity")))
    else:
        raise InputError(f"unknown family {family!r}; expected one of {', '.join(GENERATORS)}")
    if p:
        raise InputError(f"unknown parameter(s) for {fam}: {', '.join(sorted(p))}")
    return inst


def cmd_generate(args) -> int:
    inst = generate_instance(args.family, _kv(args.params))
    _emit(args, docio.dumps(inst))
    return EXIT_OK


# --- entry point ------------------------------------------------------------------------


def _solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance (default 1e-8)")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="auto", choices=("auto", "projection", "frank_wolfe", "best_response"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cgbias", description="Congestion games with biased agents.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="equilibrium flow of an instance")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--biased", dest="biased", action="store_true", default=True, help="perceived costs (default)")
    g.add_argument("--true", dest="biased", action="store_false", help="ignore biases")
    _solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("opt", help="socially optimal flow")
    p.add_argument("file")
    _solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("bpoa", help="measured BPoA with the analytic bound when derivable")
    p.add_argument("file")
    _solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bpoa)

    p = sub.add_parser("sweep", help="bound vs measured BPoA on tight instances, as CSV")
    p.add_argument("--class", dest="cls", required=True, help="affine, quadratic or poly:D")
    p.add_argument("--bias-family", required=True, help="tax or pessimism")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    _solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("smooth", help="fit or verify biased-smoothness constants")
    p.add_argument("action", choices=("fit", "verify"))
    p.add_argument("--class", dest="cls")
    p.add_argument("--cost", help="JSON cost descriptor or coefficients a0,a1,...")
    p.add_argument("--bias", default="identity")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--domain", default="0,10")
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--tol", type=float, default=1e-9, help="allowed violation for verify")
    p.add_argument("--out")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("audit", help="check the per-type lemmas and diverse bounds")
    p.add_argument("file")
    _solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("generate", help="write a named example game as an instance document")
    p.add_argument("family", help=", ".join(GENERATORS))
    p.add_argument("params", nargs="*", help="key=value, e.g. a=1 d=2 bias=tax:0.5")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NotConverged as exc:
        print(f"cgbias: not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (InputError, docio.DocumentError, Unsupported, PathExplosion, ValueError) as exc:
        print(f"cgbias: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
