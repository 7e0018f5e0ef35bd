"""Model parameters, social-index distributions and random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import integrate, special, stats


class DynNetError(Exception):
    """Base class for all errors raised by the package."""


class InvalidParams(DynNetError, ValueError):
    pass


class SubcriticalPopulation(InvalidParams):
    pass


class NegativeRate(InvalidParams):
    pass


class ZeroGamma(InvalidParams):
    """beta + mu == 0: the dynamics are legal but no analytic formula applies."""


class InfiniteMoment(DynNetError, ValueError):
    pass


class NonConvergence(DynNetError, ArithmeticError):
    pass


class Version(str, Enum):
    U = "U"
    P = "P"


@dataclass(frozen=True)
class ModelParams:
    """Rates of the node and edge dynamics.

    ``lam`` and ``mu`` are the per-node birth and death rates, ``alpha``
    scales the edge-creation rate ``alpha * S_i`` of node ``i`` and ``beta``
    is the per-edge deletion rate.
    """

    lam: float
    mu: float
    alpha: float
    beta: float
    version: Version = Version.U

    def __post_init__(self):
        object.__setattr__(self, "version", Version(self.version))
        for name in ("lam", "mu", "alpha", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        validate(self, analytic=False)

    @property
    def gamma(self) -> float:
        return self.beta + self.mu

    def with_(self, **changes) -> "ModelParams":
        d = {"lam": self.lam, "mu": self.mu, "alpha": self.alpha,
             "beta": self.beta, "version": self.version}
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "mu": self.mu, "alpha": self.alpha,
                "beta": self.beta, "version": self.version.value}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(lam=d["lambda"], mu=d["mu"], alpha=d["alpha"],
                   beta=d["beta"], version=d.get("version", "U"))


def validate(params: ModelParams, analytic: bool = True) -> None:
    """Raise the error naming the first violated constraint.

    With ``analytic=False`` a zero ``beta + mu`` is accepted, since the
    dynamics are well defined there.
    """
    for name in ("lam", "mu", "alpha", "beta"):
        v = getattr(params, name)
        if not (v >= 0) or math.isinf(v):
            raise NegativeRate(f"{name}={v} must be finite and >= 0")
    if not params.lam > params.mu:
        raise SubcriticalPopulation(
            f"birth rate {params.lam} must exceed death rate {params.mu}")
    if analytic and params.beta + params.mu <= 0:
        raise ZeroGamma("beta + mu = 0; analytic results need beta + mu > 0")


# ---------------------------------------------------------------------------
# social index distributions


class SocialIndexDistribution:
    """Law of the social index S, with exact moments.

    Discrete families expose ``atoms()``; continuous ones expose ``pdf`` and
    ``ppf``.  ``density`` is the pmf or the pdf, whichever applies.
    """

    kind: str = ""
    is_discrete: bool = False

    def moment(self, k: int) -> float:
        raise NotImplementedError

    @property
    def m1(self) -> float:
        return self.moment(1)

    @property
    def m2(self) -> float:
        return self.moment(2)

    @property
    def m3(self) -> float:
        return self.moment(3)

    def moments(self) -> tuple[float, float, float]:
        return self.m1, self.m2, self.m3

    @property
    def variance(self) -> float:
        return self.m2 - self.m1 ** 2

    def sample(self, gen: np.random.Generator, size=None):
        raise NotImplementedError

    def density(self, x):
        raise NotImplementedError

    def expect(self, fn: Callable[[float], float]) -> float:
        """E[fn(S)], exactly for discrete laws and by quadrature otherwise."""
        if self.is_discrete:
            vals, probs = self.atoms()
            return float(sum(p * fn(v) for v, p in zip(vals, probs)))
        lo, hi = self.support()
        val, _ = integrate.quad(lambda s: fn(s) * self.pdf(s), lo, hi,
                                epsabs=1e-13, epsrel=1e-12, limit=400)
        return float(val)

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def require_moments(self, *orders: int) -> None:
        for k in orders:
            if math.isinf(self.moment(k)):
                raise InfiniteMoment(f"E[S^{k}] is infinite for {self!r}")


class _Discrete(SocialIndexDistribution):
    is_discrete = True

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def moment(self, k: int) -> float:
        vals, probs = self.atoms()
        return float(np.dot(probs, vals ** k))

    def density(self, x):
        vals, probs = self.atoms()
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for v, p in zip(vals, probs):
            out = out + np.where(x == v, p, 0.0)
        return out if out.ndim else float(out)

    def sample(self, gen, size=None):
        vals, probs = self.atoms()
        if len(vals) == 1:
            return float(vals[0]) if size is None else np.full(size, vals[0])
        idx = gen.choice(len(vals), size=size, p=probs)
        return vals[idx] if size is not None else float(vals[idx])

    def support(self):
        vals, _ = self.atoms()
        return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class Constant(_Discrete):
    value: float = 1.0
    kind = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise InvalidParams("social index must be positive")

    def atoms(self):
        return np.array([self.value]), np.array([1.0])

    def moment(self, k: int) -> float:
        return self.value ** k

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class Discrete(_Discrete):
    """Finitely many atoms ``values`` with masses ``probs``."""

    values: tuple = (1.0,)
    probs: tuple = (1.0,)
    kind = "discrete"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise InvalidParams("values and probs must have equal nonzero length")
        if min(self.values) <= 0 or min(self.probs) < 0:
            raise InvalidParams("atoms must be positive, masses nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise InvalidParams(f"masses sum to {sum(self.probs)}, not 1")

    def atoms(self):
        return np.array(self.values), np.array(self.probs)

    def to_dict(self):
        return {"kind": self.kind, "values": list(self.values),
                "probs": list(self.probs)}


@dataclass(frozen=True)
class TwoPoint(_Discrete):
    """S = low with probability p, otherwise high."""

    low: float = 1.0
    high: float = 2.0
    p: float = 0.5
    kind = "two_point"

    def __post_init__(self):
        if min(self.low, self.high) <= 0 or not 0 <= self.p <= 1:
            raise InvalidParams("need positive atoms and p in [0, 1]")

    def atoms(self):
        return np.array([self.low, self.high]), np.array([self.p, 1.0 - self.p])

    def moment(self, k: int) -> float:
        return self.p * self.low ** k + (1.0 - self.p) * self.high ** k

    def to_dict(self):
        return {"kind": self.kind, "low": self.low, "high": self.high, "p": self.p}


@dataclass(frozen=True)
class Exponential(SocialIndexDistribution):
    rate: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidParams("rate must be positive")

    def moment(self, k):
        return math.factorial(k) / self.rate ** k

    def pdf(self, s):
        return self.rate * np.exp(-self.rate * np.asarray(s, dtype=float))

    density = pdf

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def sample(self, gen, size=None):
        return gen.exponential(1.0 / self.rate, size=size)

    def support(self):
        return 0.0, math.inf

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class Pareto(SocialIndexDistribution):
    """Pareto law on [scale, inf) with tail index ``shape``."""

    shape: float = 3.0
    scale: float = 1.0
    kind = "pareto"

    def __post_init__(self):
        if not (self.shape > 1 and self.scale > 0):
            raise InvalidParams("Pareto needs shape > 1 (finite mean) and scale > 0")

    def moment(self, k):
        if self.shape <= k:
            return math.inf
        return self.shape * self.scale ** k / (self.shape - k)

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(s >= self.scale,
                           self.shape * self.scale ** self.shape / s ** (self.shape + 1),
                           0.0)
        return out if out.ndim else float(out)

    density = pdf

    def ppf(self, u):
        return self.scale * (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / self.shape)

    def sample(self, gen, size=None):
        return self.scale * (1.0 + gen.pareto(self.shape, size=size))

    def support(self):
        return self.scale, math.inf

    def to_dict(self):
        return {"kind": self.kind, "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class LogNormal(SocialIndexDistribution):
    """exp(N(m, v)); ``v`` is the variance of the underlying normal."""

    m: float = 0.0
    v: float = 1.0
    kind = "lognormal"

    def __post_init__(self):
        if not self.v > 0:
            raise InvalidParams("log-variance must be positive")

    def moment(self, k):
        return math.exp(k * self.m + 0.5 * k * k * self.v)

    def pdf(self, s):
        return stats.lognorm.pdf(s, math.sqrt(self.v), scale=math.exp(self.m))

    density = pdf

    def ppf(self, u):
        return np.exp(self.m + math.sqrt(self.v) * special.ndtri(np.asarray(u, dtype=float)))

    def sample(self, gen, size=None):
        return gen.lognormal(self.m, math.sqrt(self.v), size=size)

    def support(self):
        return 0.0, math.inf

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "v": self.v}


_KINDS = {
    "constant": (Constant, ("value",)),
    "two_point": (TwoPoint, ("low", "high", "p")),
    "discrete": (Discrete, ("values", "probs")),
    "exponential": (Exponential, ("rate",)),
    "pareto": (Pareto, ("shape", "scale")),
    "lognormal": (LogNormal, ("m", "v")),
}

_ALIASES = {"const": "constant", "two": "two_point", "twopoint": "two_point",
            "exp": "exponential", "lognorm": "lognormal"}


def distribution_from_dict(d: dict) -> SocialIndexDistribution:
    kind = _ALIASES.get(d["kind"], d["kind"])
    try:
        cls, fields = _KINDS[kind]
    except KeyError:
        raise InvalidParams(f"unknown social index kind {d['kind']!r}") from None
    return cls(**{f: d[f] for f in fields if f in d})


def parse_distribution(text: str) -> SocialIndexDistribution:
    """Parse the ``kind:args`` command-line form.

    ``const:1``, ``two:1,2,0.5``, ``exp:1``, ``pareto:3,1``, ``lognormal:0,0.5``,
    ``discrete:1@0.2,2@0.3,3@0.5``.
    """
    kind, _, args = text.partition(":")
    kind = _ALIASES.get(kind.strip().lower(), kind.strip().lower())
    if kind not in _KINDS:
        raise InvalidParams(f"unknown social index kind {kind!r}")
    if kind == "discrete":
        pairs = [a.split("@") for a in args.split(",") if a]
        return Discrete(tuple(float(v) for v, _ in pairs),
                        tuple(float(p) for _, p in pairs))
    cls, fields = _KINDS[kind]
    try:
        nums = [float(a) for a in args.split(",") if a.strip()]
    except ValueError:
        raise InvalidParams(f"bad arguments in {text!r}") from None
    if len(nums) > len(fields):
        raise InvalidParams(f"too many arguments for {kind}: {text!r}")
    return cls(*nums)


def config_to_dict(params: ModelParams, dist: SocialIndexDistribution) -> dict:
    d = params.to_dict()
    d["social_index"] = dist.to_dict()
    return d


def config_from_dict(d: dict) -> tuple[ModelParams, SocialIndexDistribution]:
    return ModelParams.from_dict(d), distribution_from_dict(d["social_index"])


def moments(dist: SocialIndexDistribution) -> tuple[float, float, float]:
    return dist.moments()


def sample_index(dist: SocialIndexDistribution, rng: "RngStream") -> float:
    return float(dist.sample(rng.gen))


# ---------------------------------------------------------------------------
# random streams


@dataclass
class RngStream:
    """Counter-based (Philox) stream addressed by ``(seed, stream, path)``.

    Substreams extend the path, so replicas and restarts draw from streams
    that are independent by construction.  The buffered helpers keep the
    per-event cost of the simulator low; they consume the underlying
    generator in a fixed order, so replays are exact.
    """

    seed: int
    stream: int = 0
    path: tuple = ()
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)
    _ubuf: list = field(default_factory=list, repr=False, compare=False)
    _upos: int = field(default=0, repr=False, compare=False)
    _sbufs: dict = field(default_factory=dict, repr=False, compare=False)

    _BLOCK = 8192

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.path))
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def substream(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.stream, (*self.path, int(i)))

    def uniform(self) -> float:
        """One U[0, 1) draw from a buffered block."""
        pos = self._upos
        buf = self._ubuf
        if pos >= len(buf):
            buf = self._ubuf = self.gen.random(self._BLOCK).tolist()
            pos = 0
        self._upos = pos + 1
        return buf[pos]

    def draw(self, dist: SocialIndexDistribution) -> float:
        """One social index draw from a buffered block."""
        entry = self._sbufs.get(dist)
        if entry is None or entry[1] >= len(entry[0]):
            entry = [np.asarray(dist.sample(self.gen, 1024), dtype=float).tolist(), 0]
            self._sbufs[dist] = entry
        v = entry[0][entry[1]]
        entry[1] += 1
        return v
