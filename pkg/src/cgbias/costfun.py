"""Edge cost models and the behavioural bias transforms applied to them.

Every cost model is a nondecreasing function of the load on ``[0, inf)`` and is
vectorised over numpy arrays.  Bias transforms return new cost models in closed
form wherever one exists, so the perceived costs keep exact derivatives and
integrals (the solvers need both).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from numpy.polynomial import polynomial as P

from .exceptions import CalculusUnavailable, DomainError

__all__ = [
    "CostModel",
    "Polynomial",
    "ShiftedPower",
    "PiecewisePolynomial",
    "TableCost",
    "BiasSpec",
    "Identity",
    "Tax",
    "Pessimism",
    "MeanVar",
    "Capacity",
    "Override",
    "BiasedCost",
    "apply_bias",
    "marginal",
    "small_bias_factor",
    "evaluate",
    "deriv",
    "integral",
]


def _as_load(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"cost evaluated at negative load {arr.min()!r}")
    return arr


def _out(arr, x):
    return float(arr) if np.ndim(x) == 0 else arr


class CostModel:
    """Base class for one-dimensional edge latency functions."""

    kind = "abstract"

    def __call__(self, x):
        x_arr = _as_load(x)
        return _out(self._eval(x_arr), x)

    def deriv(self, x):
        x_arr = _as_load(x)
        return _out(self._deriv(x_arr), x)

    def integral(self, x):
        """Definite integral of the cost from 0 to ``x``."""
        x_arr = _as_load(x)
        return _out(self._integral(x_arr), x)

    def marginal(self) -> "CostModel":
        """Return ``c*(x) = c(x) + x c'(x)``, the derivative of ``x c(x)``."""
        raise CalculusUnavailable(f"{self.kind} cost has no marginal form")

    def to_polynomial(self) -> "Polynomial":
        raise CalculusUnavailable(f"{self.kind} cost is not polynomial")

    @property
    def is_polynomial(self) -> bool:
        return False

    @property
    def has_calculus(self) -> bool:
        return True

    def _eval(self, x):
        raise NotImplementedError

    def _deriv(self, x):
        raise CalculusUnavailable(f"{self.kind} cost has no derivative")

    def _integral(self, x):
        raise CalculusUnavailable(f"{self.kind} cost has no integral")


class Polynomial(CostModel):
    """``sum_k a_k x**k`` with nonnegative coefficients (lowest degree first)."""

    kind = "poly"

    def __init__(self, coefficients):
        coef = np.atleast_1d(np.asarray(coefficients, dtype=float))
        if coef.ndim != 1 or coef.size == 0:
            raise ValueError("polynomial needs a flat, nonempty coefficient list")
        if np.any(~np.isfinite(coef)):
            raise ValueError("polynomial coefficients must be finite")
        if np.any(coef < 0):
            raise ValueError("polynomial coefficients must be nonnegative")
        nz = np.flatnonzero(coef)
        coef = coef[: nz[-1] + 1] if nz.size else coef[:1]
        self.coefficients = coef
        self.coefficients.setflags(write=False)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_polynomial(self) -> bool:
        return True

    def to_polynomial(self):
        return self

    def _eval(self, x):
        return P.polyval(x, self.coefficients)

    def _deriv(self, x):
        if self.degree == 0:
            return np.zeros_like(x, dtype=float)
        return P.polyval(x, P.polyder(self.coefficients))

    def _integral(self, x):
        return P.polyval(x, P.polyint(self.coefficients))

    def marginal(self):
        k = np.arange(1, self.degree + 2)
        return Polynomial(self.coefficients * k)

    def __eq__(self, other):
        return isinstance(other, Polynomial) and np.array_equal(self.coefficients, other.coefficients)

    def __hash__(self):
        return hash(("poly", tuple(self.coefficients)))

    def __repr__(self):
        return f"Polynomial({self.coefficients.tolist()})"


class ShiftedPower(CostModel):
    """``scale * (x + shift)**degree``; used by the generated exhibits."""

    kind = "power"

    def __init__(self, scale, degree, shift=0.0):
        if scale < 0 or shift < 0:
            raise ValueError("scale and shift must be nonnegative")
        if int(degree) != degree or degree < 0:
            raise ValueError("degree must be a nonnegative integer")
        self.scale = float(scale)
        self.degree = int(degree)
        self.shift = float(shift)

    def _eval(self, x):
        return self.scale * (x + self.shift) ** self.degree

    def _deriv(self, x):
        if self.degree == 0:
            return np.zeros_like(x, dtype=float)
        return self.scale * self.degree * (x + self.shift) ** (self.degree - 1)

    def _integral(self, x):
        d1 = self.degree + 1
        return self.scale / d1 * ((x + self.shift) ** d1 - self.shift**d1)

    def to_polynomial(self):
        d = self.degree
        coef = [self.scale * math.comb(d, k) * self.shift ** (d - k) for k in range(d + 1)]
        return Polynomial(coef)

    @property
    def is_polynomial(self) -> bool:
        return True

    def marginal(self):
        return self.to_polynomial().marginal()

    def __eq__(self, other):
        return isinstance(other, ShiftedPower) and (self.scale, self.degree, self.shift) == (
            other.scale,
            other.degree,
            other.shift,
        )

    def __hash__(self):
        return hash(("power", self.scale, self.degree, self.shift))

    def __repr__(self):
        return f"ShiftedPower(scale={self.scale!r}, degree={self.degree}, shift={self.shift!r})"


class PiecewisePolynomial(CostModel):
    """Two polynomial pieces joined at ``threshold`` (lower piece includes it)."""

    kind = "piecewise"

    def __init__(self, threshold, lower: Polynomial, upper: Polynomial):
        self.threshold = float(threshold)
        self.lower = lower
        self.upper = upper

    def _eval(self, x):
        return np.where(x <= self.threshold, self.lower._eval(x), self.upper._eval(x))

    def _deriv(self, x):
        return np.where(x <= self.threshold, self.lower._deriv(x), self.upper._deriv(x))

    def _integral(self, x):
        t = self.threshold
        low = self.lower._integral(np.minimum(x, t))
        high = self.upper._integral(np.maximum(x, t)) - self.upper._integral(np.asarray(t))
        return low + high

    def marginal(self):
        return PiecewisePolynomial(self.threshold, self.lower.marginal(), self.upper.marginal())

    def __repr__(self):
        return f"PiecewisePolynomial({self.threshold!r}, {self.lower!r}, {self.upper!r})"


class TableCost(CostModel):
    """Piecewise-linear interpolation of tabulated values, flat beyond the ends.

    Tables carry no derivative or integral; only the best-response solver,
    which needs nothing but point evaluations, accepts them.
    """

    kind = "table"

    def __init__(self, loads, values):
        xs = np.asarray(loads, dtype=float)
        ys = np.asarray(values, dtype=float)
        if xs.shape != ys.shape or xs.ndim != 1 or xs.size == 0:
            raise ValueError("table needs matching 1-D load and value arrays")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("table loads must be strictly increasing")
        if np.any(np.diff(ys) < 0) or np.any(ys < 0):
            raise ValueError("table values must be nonnegative and nondecreasing")
        self.loads = xs
        self.values = ys

    @property
    def has_calculus(self) -> bool:
        return False

    def _eval(self, x):
        return np.interp(x, self.loads, self.values)

    def __repr__(self):
        return f"TableCost({self.loads.tolist()}, {self.values.tolist()})"


# --- calculus helpers ------------------------------------------------------


def evaluate(c: CostModel, x):
    return c(x)


def deriv(c: CostModel, x):
    return c.deriv(x)


def integral(c: CostModel, x):
    return c.integral(x)


def marginal(c: CostModel) -> CostModel:
    return c.marginal()


# --- bias specifications ---------------------------------------------------


class BiasSpec:
    """Marker base for the bias variants."""

    name = "abstract"


@dataclass(frozen=True)
class Identity(BiasSpec):
    name = "identity"


@dataclass(frozen=True)
class Tax(BiasSpec):
    """Tax sensitivity: perceived ``c(x) + beta * x * c'(x)``."""

    beta: float
    name = "tax"

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"tax sensitivity must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class Pessimism(BiasSpec):
    """Worst-case load inflation: perceived ``c(r * x)``."""

    r: float
    name = "pessimism"

    def __post_init__(self):
        if not self.r >= 1:
            raise ValueError(f"pessimism factor must be >= 1, got {self.r}")


@dataclass(frozen=True)
class MeanVar(BiasSpec):
    """Mean-variance risk aversion: perceived ``c(x) + gamma * v(x)``.

    ``variance`` is either one cost model shared by all edges or a mapping from
    edge id to cost model (edges absent from the mapping have zero variance).
    ``kappa`` is the declared bound ``v <= kappa * c``; ``None`` means unbounded.
    """

    gamma: float
    variance: Union[CostModel, Mapping[str, CostModel]]
    kappa: Optional[float] = None
    name = "meanvar"

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"risk aversion must be >= 0, got {self.gamma}")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    def variance_for(self, edge=None) -> Optional[CostModel]:
        if isinstance(self.variance, CostModel):
            return self.variance
        return self.variance.get(edge)

    def __hash__(self):
        var = self.variance if isinstance(self.variance, CostModel) else tuple(sorted(self.variance.items(), key=lambda kv: kv[0]))
        return hash(("meanvar", self.gamma, repr(var), self.kappa))


@dataclass(frozen=True)
class Capacity(BiasSpec):
    """Soft capacity: cost blows up past ``L - delta`` and exceeds ``M c(L)`` at ``L``."""

    L: float
    delta: float
    M: float
    name = "capacity"

    def __post_init__(self):
        if not (self.L > 0 and 0 < self.delta < self.L and self.M > 0):
            raise ValueError("capacity needs L > 0, 0 < delta < L and M > 0")


@dataclass(frozen=True)
class Override(BiasSpec):
    """Explicit per-edge perceived costs; edges not listed keep their true cost."""

    table: Mapping[str, CostModel] = field(default_factory=dict)
    name = "override"

    def __hash__(self):
        return hash(("override", tuple(sorted((k, repr(v)) for k, v in self.table.items()))))


@dataclass(frozen=True)
class BiasedCost:
    """A true cost together with the perceived cost a bias induces."""

    base: CostModel
    bias: BiasSpec
    perceived: CostModel
    kappa: Optional[float] = None

    def __call__(self, x):
        return self.perceived(x)

    def deriv(self, x):
        return self.perceived.deriv(x)

    def integral(self, x):
        return self.perceived.integral(x)

    @property
    def has_potential(self) -> bool:
        return self.perceived.has_calculus and not isinstance(self.bias, Override)


def _compose_linear(poly: Polynomial, r: float) -> Polynomial:
    return Polynomial(poly.coefficients * r ** np.arange(poly.degree + 1))


def _capacity_cost(c: CostModel, cap: Capacity) -> PiecewisePolynomial:
    base = c.to_polynomial()
    start = cap.L - cap.delta
    # y = (x - start) / delta, multiplier (M y + 1) y^2
    y = np.array([-start / cap.delta, 1.0 / cap.delta])
    mult = P.polyadd(cap.M * P.polypow(y, 3), P.polypow(y, 2))
    upper = P.polymul(base.coefficients, mult)
    # the printed multiplier starts at 0; switch once it reaches 1 so the
    # perceived cost never drops below the true cost
    roots = np.roots([cap.M, 1.0, 0.0, -1.0])
    y0 = min(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0)
    threshold = start + y0 * cap.delta
    upper_model = _UnsignedPolynomial(upper)
    return PiecewisePolynomial(threshold, base, upper_model)


class _UnsignedPolynomial(Polynomial):
    """Polynomial whose coefficients may be negative (only used past a threshold)."""

    def __init__(self, coefficients):
        coef = np.asarray(coefficients, dtype=float)
        nz = np.flatnonzero(coef)
        coef = coef[: nz[-1] + 1] if nz.size else coef[:1]
        self.coefficients = coef
        self.coefficients.setflags(write=False)

    def marginal(self):
        k = np.arange(1, self.degree + 2)
        return _UnsignedPolynomial(self.coefficients * k)


_KAPPA_GRID = np.linspace(0.0, 10.0, 201)


def apply_bias(c: CostModel, bias: BiasSpec, edge=None) -> BiasedCost:
    """Perceived cost of ``c`` under ``bias``; ``edge`` keys per-edge tables."""
    if isinstance(bias, Identity):
        return BiasedCost(c, bias, c)
    if isinstance(bias, Tax):
        if bias.beta == 0:
            return BiasedCost(c, bias, c)
        poly = c.to_polynomial()
        k = np.arange(poly.degree + 1)
        return BiasedCost(c, bias, Polynomial(poly.coefficients * (1 + bias.beta * k)))
    if isinstance(bias, Pessimism):
        if isinstance(c, ShiftedPower):
            r = bias.r
            return BiasedCost(c, bias, ShiftedPower(c.scale * r**c.degree, c.degree, c.shift / r))
        if isinstance(c, TableCost):
            return BiasedCost(c, bias, TableCost(c.loads / bias.r, c.values))
        return BiasedCost(c, bias, _compose_linear(c.to_polynomial(), bias.r))
    if isinstance(bias, MeanVar):
        v = bias.variance_for(edge)
        if v is None or bias.gamma == 0:
            return BiasedCost(c, bias, c, kappa=bias.kappa)
        kappa = bias.kappa
        if kappa is not None:
            if np.any(v(_KAPPA_GRID) > kappa * c(_KAPPA_GRID) * (1 + 1e-12) + 1e-15):
                warnings.warn(
                    f"variance exceeds {kappa} * cost on edge {edge!r}; treating kappa as unbounded",
                    stacklevel=2,
                )
                kappa = None
        summed = P.polyadd(c.to_polynomial().coefficients, bias.gamma * v.to_polynomial().coefficients)
        return BiasedCost(c, bias, Polynomial(summed), kappa=kappa)
    if isinstance(bias, Capacity):
        return BiasedCost(c, bias, _capacity_cost(c, bias))
    if isinstance(bias, Override):
        return BiasedCost(c, bias, bias.table.get(edge, c))
    raise TypeError(f"unknown bias {bias!r}")


def small_bias_factor(c: CostModel, bc: BiasedCost, domain=(0.0, 10.0), grid: int = 1001) -> float:
    """Smallest eps with ``max(chat/c, c/chat) <= 1 + eps`` on a sample grid."""
    xs = np.linspace(domain[0], domain[1], grid)
    true = np.asarray(c(xs), dtype=float)
    seen = np.asarray(bc(xs), dtype=float)
    both_zero = (true == 0) & (seen == 0)
    if np.any((true == 0) ^ (seen == 0)):
        return math.inf
    t, s = true[~both_zero], seen[~both_zero]
    if t.size == 0:
        return 0.0
    ratio = np.maximum(s / t, t / s)
    return max(float(ratio.max()) - 1.0, 0.0)
