"""Service-time laws and validated parameters of the two-class priority retrial queue.

A service distribution exposes the handful of functionals the rest of the
package needs: the Laplace-Stieltjes transform (LST) on the closed right
half-plane, its derivative, the survival function, exact samplers, the
equilibrium (stationary-excess) law and a tail descriptor.  Exponential and
Erlang laws use closed forms; the shifted Pareto law evaluates its LST by
double-exponential quadrature on a rotated ray so that complex arguments
(needed for generating-function inversion) cost the same as real ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special, stats

from .errors import AssumptionViolation, BadParam, QuadratureFailure, Unstable

__all__ = [
    "TailDescriptor",
    "ServiceDist",
    "Exponential",
    "Erlang",
    "ParetoShifted",
    "Mixture",
    "ModelParams",
    "validate",
]


@dataclass(frozen=True)
class TailDescriptor:
    """Tail shape P{T > t} ~ L0 * exp(-r t) * t**(-a) as t -> infinity."""

    r: float
    a: float
    L0: float

    @property
    def is_power(self) -> bool:
        return self.r == 0.0


def _maybe_scalar(out: np.ndarray, scalar: bool):
    if not scalar:
        return out
    v = complex(out.reshape(-1)[0])
    return v.real if abs(v.imag) < 1e-13 * max(1.0, abs(v.real)) else v


def _as_complex(s):
    arr = np.asarray(s, dtype=complex)
    scalar = arr.ndim == 0
    return np.atleast_1d(arr), scalar


class ServiceDist:
    """Common interface of service-time laws; subclasses fill in the law."""

    kind: str

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def moment2(self) -> float:
        raise NotImplementedError

    @property
    def tail(self) -> TailDescriptor:
        raise NotImplementedError

    def lst(self, s):
        """E exp(-s T) for Re(s) >= 0; accepts scalars or arrays."""
        raise NotImplementedError

    def lst_deriv(self, s):
        """d/ds of the LST (equals -E[T exp(-s T)])."""
        raise NotImplementedError

    def survival(self, t):
        raise NotImplementedError

    def equilibrium(self) -> "ServiceDist":
        """Law with density survival(t)/mean (stationary excess)."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size):
        raise NotImplementedError

    def sample_one(self, pyrng) -> float:
        """Scalar draw using a random.Random; kept allocation-free for the
        simulator's event loop."""
        raise NotImplementedError

    def poisson_mixture_pmf(self, lam: float, kmax: int) -> np.ndarray:
        """b_k = E[(lam T)^k exp(-lam T) / k!] for k = 0..kmax.

        These are the probabilities P{N_lam(T) = k} of the number of Poisson
        arrivals during one service time.
        """
        raise NotImplementedError


class Exponential(ServiceDist):
    kind = "exponential"

    def __init__(self, rate: float):
        if not (rate > 0 and math.isfinite(rate)):
            raise BadParam(f"exponential rate must be positive, got {rate}")
        self.rate = float(rate)

    def __repr__(self):
        return f"Exponential(rate={self.rate})"

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def moment2(self):
        return 2.0 / self.rate**2

    @property
    def tail(self):
        return TailDescriptor(r=self.rate, a=0.0, L0=1.0)

    def lst(self, s):
        arr, scalar = _as_complex(s)
        return _maybe_scalar(self.rate / (self.rate + arr), scalar)

    def lst_deriv(self, s):
        arr, scalar = _as_complex(s)
        return _maybe_scalar(-self.rate / (self.rate + arr) ** 2, scalar)

    def survival(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def equilibrium(self):
        return self

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def sample_one(self, pyrng):
        return pyrng.expovariate(self.rate)

    def poisson_mixture_pmf(self, lam, kmax):
        # geometric: b_k = (rate/(lam+rate)) (lam/(lam+rate))^k
        ratio = lam / (lam + self.rate)
        k = np.arange(kmax + 1)
        return (self.rate / (lam + self.rate)) * ratio**k


class Erlang(ServiceDist):
    kind = "erlang"

    def __init__(self, shape: int, rate: float):
        if int(shape) != shape or shape < 1:
            raise BadParam(f"erlang shape must be a positive integer, got {shape}")
        if not (rate > 0 and math.isfinite(rate)):
            raise BadParam(f"erlang rate must be positive, got {rate}")
        self.shape = int(shape)
        self.rate = float(rate)

    def __repr__(self):
        return f"Erlang(shape={self.shape}, rate={self.rate})"

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def moment2(self):
        return self.shape * (self.shape + 1) / self.rate**2

    @property
    def tail(self):
        k = self.shape
        return TailDescriptor(
            r=self.rate, a=-(k - 1), L0=self.rate ** (k - 1) / math.factorial(k - 1)
        )

    def lst(self, s):
        arr, scalar = _as_complex(s)
        return _maybe_scalar((self.rate / (self.rate + arr)) ** self.shape, scalar)

    def lst_deriv(self, s):
        arr, scalar = _as_complex(s)
        k, nu = self.shape, self.rate
        return _maybe_scalar(-k * nu**k / (nu + arr) ** (k + 1), scalar)

    def survival(self, t):
        return special.gammaincc(self.shape, self.rate * np.asarray(t, dtype=float))

    def equilibrium(self):
        # classical identity: the excess of an Erlang(k) is an equal mixture
        # of Erlang(1..k) with the same rate
        comps = [Erlang(i, self.rate) for i in range(1, self.shape + 1)]
        return Mixture([1.0 / self.shape] * self.shape, comps)

    def sample(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def sample_one(self, pyrng):
        return pyrng.gammavariate(self.shape, 1.0 / self.rate)

    def poisson_mixture_pmf(self, lam, kmax):
        # negative binomial: shape successes with prob rate/(lam+rate)
        k = np.arange(kmax + 1)
        return stats.nbinom.pmf(k, self.shape, self.rate / (lam + self.rate))


# quadrature levels tried in order: (step, half-width) of the exp-sinh rule
_ESH_LEVELS = [(0.08, 4.6), (0.05, 5.0), (0.032, 5.4)]


def _expsinh_rule(step, half_width):
    u = np.arange(-half_width, half_width + step / 2, step)
    t = np.exp(0.5 * np.pi * np.sinh(u))
    w = t * 0.5 * np.pi * np.cosh(u) * step
    keep = (w > 1e-300) & np.isfinite(t)
    return t[keep], w[keep]


class ParetoShifted(ServiceDist):
    """Survival (1 + t/scale)**(-index); all moments below `index` finite."""

    kind = "pareto"

    def __init__(self, index: float, scale: float):
        if not (index > 0 and math.isfinite(index)):
            raise BadParam(f"pareto index must be positive, got {index}")
        if not (scale > 0 and math.isfinite(scale)):
            raise BadParam(f"pareto scale must be positive, got {scale}")
        self.index = float(index)
        self.scale = float(scale)
        self._nodes = None

    @classmethod
    def from_mean(cls, index: float, mean: float):
        if index <= 1:
            raise BadParam("pareto index must exceed 1 to prescribe a mean")
        return cls(index, mean * (index - 1))

    def __repr__(self):
        return f"ParetoShifted(index={self.index}, scale={self.scale})"

    @property
    def mean(self):
        return self.scale / (self.index - 1) if self.index > 1 else math.inf

    @property
    def moment2(self):
        a, s = self.index, self.scale
        return 2 * s**2 / ((a - 1) * (a - 2)) if a > 2 else math.inf

    @property
    def tail(self):
        return TailDescriptor(r=0.0, a=self.index, L0=self.scale**self.index)

    def _density(self, t):
        a, s = self.index, self.scale
        return (a / s) * (1 + t / s) ** (-(a + 1))

    def _rule(self):
        # pick the coarsest exp-sinh level that agrees with the next finer
        # one to ~1e-12 on a probe grid spanning the arguments we meet
        if self._nodes is None:
            probe = np.array(
                [1e-3, 0.1, 1.0, 10.0, 50.0, 0.005 + 0.9j, 0.01 - 2j, 2 + 1j, 1e-4 + 0.3j]
            )
            prev = None
            for step, hw in _ESH_LEVELS:
                rule = _expsinh_rule(step, hw)
                vals = self._lst_with_rule(probe, rule)
                if prev is not None and np.max(np.abs(vals - prev)) < 1e-12:
                    self._nodes = rule
                    break
                prev = vals
            else:
                raise QuadratureFailure(
                    f"LST quadrature for {self!r} did not stabilise at 1e-12"
                )
        return self._nodes

    def _lst_with_rule(self, s_arr, rule, extra_t_power=0):
        t, w = rule
        out = np.empty(s_arr.shape, dtype=complex)
        # rotate the ray to arg(t) = -arg(s) so exp(-s t) decays without
        # oscillating; the density is analytic off (-inf, -scale]
        for lo in range(0, s_arr.size, 16384):
            s = s_arr.reshape(-1)[lo : lo + 16384]
            rot = np.exp(-1j * np.angle(s))
            tt = np.outer(rot, t)
            vals = np.exp(-np.outer(np.abs(s), t)) * self._density(tt)
            if extra_t_power:
                vals = vals * tt**extra_t_power
            out.reshape(-1)[lo : lo + 16384] = (vals @ w) * rot
        zero = s_arr == 0
        if zero.any() and extra_t_power == 0:
            out[zero] = 1.0
        return out

    @staticmethod
    def _clamp_halfplane(arr):
        # round-off from upstream root solves can leave Re(s) at -1e-16;
        # snap that to the boundary, reject anything genuinely negative
        tiny = (arr.real < 0) & (arr.real >= -1e-9)
        if tiny.any():
            arr = np.where(tiny, 1j * arr.imag, arr)
        if np.any(arr.real < 0):
            raise BadParam("pareto LST requires Re(s) >= 0")
        return arr

    def lst(self, s):
        arr, scalar = _as_complex(s)
        arr = self._clamp_halfplane(arr)
        return _maybe_scalar(self._lst_with_rule(arr, self._rule()), scalar)

    def lst_deriv(self, s):
        arr, scalar = _as_complex(s)
        arr = self._clamp_halfplane(arr)
        return _maybe_scalar(-self._lst_with_rule(arr, self._rule(), extra_t_power=1), scalar)

    def survival(self, t):
        return (1 + np.asarray(t, dtype=float) / self.scale) ** (-self.index)

    def equilibrium(self):
        # integrating the survival function lowers the index by one and
        # keeps the scale
        return ParetoShifted(self.index - 1, self.scale)

    def sample(self, rng, size):
        u = rng.random(size)
        return self.scale * (u ** (-1.0 / self.index) - 1.0)

    def sample_one(self, pyrng):
        return self.scale * (pyrng.random() ** (-1.0 / self.index) - 1.0)

    def poisson_mixture_pmf(self, lam, kmax):
        t, w = self._rule()
        logwf = np.log(w) + np.log(self._density(t))
        loglt = np.log(lam * t)
        out = np.empty(kmax + 1)
        ks = np.arange(kmax + 1)
        for lo in range(0, kmax + 1, 2048):
            k = ks[lo : lo + 2048, None]
            logterm = k * loglt[None, :] - lam * t[None, :] - special.gammaln(k + 1)
            out[lo : lo + 2048] = np.exp(special.logsumexp(logterm + logwf[None, :], axis=1))
        return out


class Mixture(ServiceDist):
    """Finite mixture of service laws (used for the merged arrival stream's
    service time and for Erlang equilibria)."""

    kind = "mixture"

    def __init__(self, weights, components):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or len(components) != w.size or np.any(w < 0):
            raise BadParam("mixture needs matching nonnegative weights")
        if abs(w.sum() - 1.0) > 1e-12:
            raise BadParam("mixture weights must sum to 1")
        self.weights = w
        self.components = list(components)

    def __repr__(self):
        return f"Mixture({list(self.weights)}, {self.components})"

    @property
    def mean(self):
        return float(sum(w * c.mean for w, c in zip(self.weights, self.components)))

    @property
    def moment2(self):
        return float(sum(w * c.moment2 for w, c in zip(self.weights, self.components)))

    @property
    def tail(self):
        # the heaviest component wins: smallest decay rate, then smallest
        # power index; matching components pool their L0 mass
        key = min((c.tail.r, c.tail.a) for c in self.components)
        L0 = sum(
            w * c.tail.L0
            for w, c in zip(self.weights, self.components)
            if (c.tail.r, c.tail.a) == key
        )
        return TailDescriptor(r=key[0], a=key[1], L0=float(L0))

    def lst(self, s):
        arr, scalar = _as_complex(s)
        out = np.zeros_like(arr)
        for w, c in zip(self.weights, self.components):
            out += w * np.atleast_1d(np.asarray(c.lst(arr), dtype=complex))
        return _maybe_scalar(out, scalar)

    def lst_deriv(self, s):
        arr, scalar = _as_complex(s)
        out = np.zeros_like(arr)
        for w, c in zip(self.weights, self.components):
            out += w * np.atleast_1d(np.asarray(c.lst_deriv(arr), dtype=complex))
        return _maybe_scalar(out, scalar)

    def survival(self, t):
        return sum(w * c.survival(t) for w, c in zip(self.weights, self.components))

    def equilibrium(self):
        means = np.array([c.mean for c in self.components])
        w = self.weights * means / self.mean
        return Mixture(w, [c.equilibrium() for c in self.components])

    def sample(self, rng, size):
        n = 1 if size is None else int(size)
        which = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty(n)
        for i, c in enumerate(self.components):
            m = which == i
            if m.any():
                out[m] = c.sample(rng, int(m.sum()))
        return out if size is not None else float(out[0])

    def sample_one(self, pyrng):
        u = pyrng.random()
        acc = 0.0
        for w, c in zip(self.weights, self.components):
            acc += w
            if u <= acc:
                return c.sample_one(pyrng)
        return self.components[-1].sample_one(pyrng)

    def poisson_mixture_pmf(self, lam, kmax):
        out = np.zeros(kmax + 1)
        for w, c in zip(self.weights, self.components):
            out += w * c.poisson_mixture_pmf(lam, kmax)
        return out


@dataclass(frozen=True)
class ModelParams:
    """Raw parameters plus derived loads of the priority retrial queue.

    lam      total Poisson arrival rate
    q        probability an arrival is Type-1 (queue, priority)
    mu       per-customer retrial rate from the orbit
    dist1/2  service-time laws for Type-1 / Type-2 customers
    """

    lam: float
    q: float
    mu: float
    dist1: ServiceDist
    dist2: ServiceDist

    @property
    def p(self):
        return 1.0 - self.q

    @property
    def lambda1(self):
        return self.lam * self.q

    @property
    def lambda2(self):
        return self.lam * self.p

    @property
    def rho1(self):
        return self.lambda1 * self.dist1.mean

    @property
    def rho2(self):
        return self.lambda2 * self.dist2.mean

    @property
    def rho(self):
        return self.rho1 + self.rho2

    @property
    def vartheta(self):
        return self.rho2 / (1.0 - self.rho1)

    @property
    def psi(self):
        return self.rho * self.lambda2 / (self.mu * (1.0 - self.rho))

    @cached_property
    def mixed_service(self) -> Mixture:
        """Service law of a typical customer: q-p mixture of the two laws."""
        return Mixture([self.q, self.p], [self.dist1, self.dist2])

    @cached_property
    def mixed_service_eq(self) -> ServiceDist:
        return self.mixed_service.equilibrium()

    @cached_property
    def dist1_eq(self) -> ServiceDist:
        return self.dist1.equilibrium()

    @cached_property
    def dist2_eq(self) -> ServiceDist:
        return self.dist2.equilibrium()


def validate(params: ModelParams) -> ModelParams:
    """Check ranges, stability and the tail-ordering assumption.

    Returns the same (immutable) params on success so calls can be chained.
    """
    if not (0.0 < params.q < 1.0):
        raise BadParam(f"q must be in (0,1), got {params.q}")
    if not (params.lam > 0 and math.isfinite(params.lam)):
        raise BadParam(f"arrival rate must be positive, got {params.lam}")
    if not (params.mu > 0 and math.isfinite(params.mu)):
        raise BadParam(f"retrial rate must be positive, got {params.mu}")
    for name, d in (("dist1", params.dist1), ("dist2", params.dist2)):
        if not (0 < d.mean < math.inf):
            raise BadParam(f"{name} must have a finite positive mean")
        if isinstance(d, ParetoShifted) and d.index <= 1:
            raise BadParam(f"{name}: pareto index must exceed 1")
    if params.rho >= 1.0:
        raise Unstable(f"rho = {params.rho:.6g} >= 1; the system is not stable")
    t1, t2 = params.dist1.tail, params.dist2.tail
    if t1.is_power and t2.is_power and t2.a <= t1.a:
        raise AssumptionViolation(
            f"power-law indices must satisfy a2 > a1, got a1={t1.a}, a2={t2.a}"
        )
    return params
