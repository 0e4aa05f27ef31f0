"""State-dependent delay functionals that ignore the most recent history.

Every functional reads the segment only at times ``<= t_now - eta_ign``.  The
inner maps ``p`` come from a small registry of named primitives so that a
delay can be written down in a flat config file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .history import HistorySegment

VARIANTS = ("point", "multi_point", "integral_of_p", "p_of_integral", "constant")
P_MAPS = ("affine_norm", "affine_mean")


@dataclass(frozen=True)
class PMap:
    """p(v) = clamp(a + b * q(v), 0, upper), q = ||v|| or <v, e_1>."""

    name: str
    a: float = 0.0
    b: float = 1.0
    upper: float = math.inf

    def __post_init__(self):
        if self.name not in P_MAPS:
            raise InvalidArgument(f"unknown inner map {self.name!r}; choose from {P_MAPS}")

    def _q(self, v: np.ndarray) -> float:
        if self.name == "affine_norm":
            return math.sqrt(math.fsum(v * v))
        return float(v[0])

    def __call__(self, v) -> float:
        x = self.a + self.b * self._q(np.asarray(v, dtype=float))
        return min(max(x, 0.0), self.upper)

    def many(self, rows: np.ndarray) -> np.ndarray:
        return np.array([self(v) for v in rows])


def make_pmap(name: str, params: dict | None, upper: float) -> PMap:
    params = dict(params or {})
    unknown = set(params) - {"a", "b"}
    if unknown:
        raise InvalidArgument(f"inner map {name!r} takes parameters a, b; got {sorted(unknown)}")
    return PMap(name, float(params.get("a", 0.0)), float(params.get("b", 1.0)), float(upper))


@dataclass(frozen=True)
class DelayFunctional:
    variant: str
    r: float
    eta_ign: float
    terms: tuple = ()
    p: PMap | None = None
    value: float = 0.0
    eta_min: float | None = None
    label: str = field(default="", compare=False)

    @property
    def floor(self) -> float:
        return 0.0 if self.eta_min is None else self.eta_min

    def raw(self, h: HistorySegment) -> float:
        """The delay before clamping to the admissible range."""
        t = h.t_now
        if self.variant == "constant":
            return self.value
        if self.variant in ("point", "multi_point"):
            return math.fsum(p(h.eval_at(t - off)) for p, off in self.terms)
        times, vals = h.window_samples(t - self.r, t - self.eta_ign)
        dt = np.diff(times)
        if self.variant == "integral_of_p":
            pv = self.p.many(vals)
            return math.fsum(0.5 * dt * (pv[:-1] + pv[1:]))
        integral = (0.5 * dt[:, None] * (vals[:-1] + vals[1:])).sum(axis=0)
        return self.p(integral)

    def clamp(self, x: float) -> tuple[float, bool]:
        lo, hi = self.floor, self.r
        if x < lo:
            return lo, True
        if x > hi:
            return hi, True
        return x, False

    def __call__(self, h: HistorySegment) -> float:
        return self.clamp(self.raw(h))[0]


def eval_delay(eta: DelayFunctional, h: HistorySegment) -> float:
    return eta(h)


def _check_common(r: float, eta_min: float | None) -> None:
    if not r > 0:
        raise InvalidArgument(f"window r must be positive, got {r}")
    if eta_min is not None and not 0 <= eta_min <= r:
        raise InvalidArgument(f"eta_min must lie in [0, r], got {eta_min}")


def _resolve_ign(offsets, r, eta_ign):
    offsets = [float(o) for o in offsets]
    if not offsets:
        raise InvalidArgument("delay.r_k: need at least one offset")
    for o in offsets:
        if o > r:
            raise InvalidArgument(f"delay.r_k: offset {o} exceeds the window r={r}")
        if not o > 0:
            raise InvalidArgument(f"delay.r_k: offset {o} must be positive")
    if eta_ign is None:
        return min(offsets)
    eta_ign = float(eta_ign)
    if not 0 < eta_ign <= r:
        raise InvalidArgument(f"delay.eta_ign must lie in (0, r], got {eta_ign}")
    bad = [o for o in offsets if o < eta_ign]
    if bad:
        raise InvalidArgument(f"delay.r_k: offset {bad[0]} lies inside the ignore zone (< eta_ign={eta_ign})")
    return eta_ign


def point_delay(p_name: str, params: dict | None, r: float, offset: float | None = None,
                eta_ign: float | None = None, eta_min: float | None = None) -> DelayFunctional:
    """eta(phi) = p(phi(-offset)); the offset defaults to the full window r."""
    _check_common(r, eta_min)
    offset = r if offset is None else offset
    ign = _resolve_ign([offset], r, eta_ign)
    return DelayFunctional("point", float(r), ign, terms=((make_pmap(p_name, params, r), float(offset)),),
                           eta_min=eta_min, label=f"point[{p_name}]")


def multi_point_delay(terms, r: float, eta_ign: float | None = None,
                      eta_min: float | None = None) -> DelayFunctional:
    """eta(phi) = sum_k p_k(phi(-r_k)) for terms ``[(p_name, params, r_k), ...]``."""
    _check_common(r, eta_min)
    terms = list(terms)
    ign = _resolve_ign([t[2] for t in terms], r, eta_ign)
    built = tuple((make_pmap(name, params, r), float(off)) for name, params, off in terms)
    return DelayFunctional("multi_point", float(r), ign, terms=built, eta_min=eta_min, label="multi_point")


def _check_ign(eta_ign, r):
    if not eta_ign > 0:
        raise InvalidArgument(f"delay.eta_ign must be positive, got {eta_ign}")
    if eta_ign > r:
        raise InvalidArgument(f"delay.eta_ign={eta_ign} exceeds the window r={r}")


def integral_delay(p_name: str, params: dict | None, eta_ign: float, r: float,
                   eta_min: float | None = None) -> DelayFunctional:
    """eta(phi) = integral over [-r, -eta_ign] of p(phi(theta))."""
    _check_common(r, eta_min)
    _check_ign(eta_ign, r)
    return DelayFunctional("integral_of_p", float(r), float(eta_ign), p=make_pmap(p_name, params, r),
                           eta_min=eta_min, label=f"integral_of_p[{p_name}]")


def p_of_integral_delay(p_name: str, params: dict | None, eta_ign: float, r: float,
                        eta_min: float | None = None) -> DelayFunctional:
    """eta(phi) = p(integral over [-r, -eta_ign] of phi(theta))."""
    _check_common(r, eta_min)
    _check_ign(eta_ign, r)
    return DelayFunctional("p_of_integral", float(r), float(eta_ign), p=make_pmap(p_name, params, r),
                           eta_min=eta_min, label=f"p_of_integral[{p_name}]")


def constant_delay(tau: float, r: float) -> DelayFunctional:
    if not 0 <= tau <= r:
        raise InvalidArgument(f"constant delay {tau} must lie in [0, r={r}]")
    return DelayFunctional("constant", float(r), float(r), value=float(tau), label="constant")


def reads_present_state_delay(p_name: str, params: dict | None, r: float, eta_ign: float) -> DelayFunctional:
    """A delay that reads phi(0) while *claiming* to ignore (-eta_ign, 0].

    Deliberately violates the ignore property; exists so the checker has
    something to reject.  Never use it in a solve.
    """
    return DelayFunctional("point", float(r), float(eta_ign), terms=((make_pmap(p_name, params, r), 0.0),),
                           label="violator[reads phi(0)]")


@dataclass(frozen=True)
class HReport:
    passed: bool
    max_discrepancy: float
    trials: int
    label: str = ""


def _random_pair(rng: np.random.Generator, r: float, eta_ign: float, n_modes: int):
    n_old = int(rng.integers(3, 25))
    n_new = int(rng.integers(2, 25))
    if eta_ign >= r:
        old = np.array([-r])
    elif r - eta_ign < 1e-9 * r:
        old = np.array([-r, -eta_ign])  # too short to subdivide
    else:
        old = np.linspace(-r, -eta_ign, n_old)
    new = np.linspace(-eta_ign, 0.0, n_new + 1)[1:]
    theta = np.concatenate((old, new))
    theta[-1] = 0.0
    scale = 10.0 ** rng.uniform(-1, 1)
    v1 = scale * rng.standard_normal((theta.size, n_modes))
    v2 = v1.copy()
    v2[old.size:] += scale * rng.standard_normal((new.size, n_modes))
    return HistorySegment(theta, v1, r), HistorySegment(theta, v2, r)


def check_H(eta: DelayFunctional, trials: int = 1000, seed: int = 0, n_modes: int = 4) -> HReport:
    """Randomized test that eta ignores the history on (-eta_ign, 0].

    Pairs of segments agree on [-r, -eta_ign] (the node -eta_ign is on both
    grids so the piecewise-linear functions agree there exactly) and differ
    afterwards.  Passes iff every pair yields bit-identical delays.
    """
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        h1, h2 = _random_pair(rng, eta.r, eta.eta_ign, n_modes)
        worst = max(worst, abs(eta(h1) - eta(h2)))
    return HReport(worst == 0.0, worst, trials, eta.label)
