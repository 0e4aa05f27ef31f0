"""Delayed reaction term F(v)(x) = int_Omega b(v(y)) f(x - y) dy.

The integrator passes the state at the delayed time; this module never sees
the history.  A Dirac kernel switches to the local form F(v)(x) = b(v(x)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, Unsupported
from .spectral import SpectralOperator, to_modal, to_nodal

B_VARIANTS = ("nicholson", "linear", "zero", "tanh")
KERNEL_VARIANTS = ("gaussian", "dirac")


@dataclass(frozen=True)
class BirthFunction:
    """Pointwise birth rate b(w) with its growth and Lipschitz constants.

    ``nicholson``: b(w) = p w exp(-w); ``linear``: b(w) = c w;
    ``tanh``: b(w) = amplitude * tanh(w); ``zero``: b = 0.
    Constants refer to the working range [0, w_max].
    """

    variant: str
    p: float = 0.0
    c: float = 0.0
    amplitude: float = 0.0
    w_max: float = 50.0

    def __post_init__(self):
        if self.variant not in B_VARIANTS:
            raise InvalidArgument(f"unknown b.variant {self.variant!r}; choose from {B_VARIANTS}")
        if not self.w_max > 0:
            raise InvalidArgument("working range bound w_max must be positive")

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if self.variant == "nicholson":
            return self.p * w * np.exp(-w)
        if self.variant == "linear":
            return self.c * w
        if self.variant == "tanh":
            return self.amplitude * np.tanh(w)
        return np.zeros_like(w)

    @property
    def growth(self) -> tuple[float, float]:
        """(C1, C_b) with |b(w)| <= C1 |w| + C_b."""
        if self.variant == "nicholson":
            return 0.0, abs(self.p) / math.e
        if self.variant == "linear":
            return abs(self.c), 0.0
        if self.variant == "tanh":
            return 0.0, abs(self.amplitude)
        return 0.0, 0.0

    @property
    def C1(self) -> float:
        return self.growth[0]

    @property
    def C_b(self) -> float:
        return self.growth[1]

    @property
    def is_bounded(self) -> bool:
        return self.C1 == 0.0

    @property
    def lipschitz(self) -> float:
        """L_b; for nicholson |b'| peaks at w = 0 on [0, inf)."""
        if self.variant == "nicholson":
            return abs(self.p)
        if self.variant == "linear":
            return abs(self.c)
        if self.variant == "tanh":
            return abs(self.amplitude)
        return 0.0

    def certify(self, n_samples: int = 20001, rtol: float = 1e-12) -> dict:
        """Check the declared constants on a dense sample of [0, w_max]."""
        w = np.linspace(0.0, self.w_max, n_samples)
        bw = np.abs(self(w))
        growth_ok = bool(np.all(bw <= (self.C1 * w + self.C_b) * (1 + rtol) + 1e-300))
        slopes = np.abs(np.diff(self(w))) / np.diff(w)
        lip_ok = bool(np.all(slopes <= self.lipschitz * (1 + rtol) + 1e-300))
        return {"growth_ok": growth_ok, "lipschitz_ok": lip_ok,
                "max_abs_b": float(bw.max()), "max_slope": float(slopes.max())}


def eval_b(b: BirthFunction, w):
    return b(w)


@dataclass(frozen=True)
class Kernel:
    variant: str
    alpha: float = 0.1

    def __post_init__(self):
        if self.variant not in KERNEL_VARIANTS:
            raise InvalidArgument(f"unknown kernel.variant {self.variant!r}; choose from {KERNEL_VARIANTS}")
        if self.variant == "gaussian" and not self.alpha > 0:
            raise InvalidArgument(f"kernel.alpha must be positive, got {self.alpha}")

    @property
    def is_local(self) -> bool:
        return self.variant == "dirac"

    @property
    def bound(self) -> float:
        """M_f = sup |f|; infinite for the Dirac kernel."""
        if self.variant == "gaussian":
            return 1.0 / math.sqrt(4.0 * math.pi * self.alpha)
        return math.inf

    def __call__(self, s):
        if self.variant != "gaussian":
            raise Unsupported("the Dirac kernel has no pointwise values")
        s = np.asarray(s, dtype=float)
        return np.exp(-s * s / (4.0 * self.alpha)) / math.sqrt(4.0 * math.pi * self.alpha)


class ReactionTerm:
    """Precomputed quadrature for F on a fixed operator grid.

    Trapezoid rule in y over [0, L] including the two boundary nodes, where
    the state vanishes and b contributes b(0).
    """

    def __init__(self, op: SpectralOperator, b: BirthFunction, f: Kernel):
        self.op, self.b, self.f = op, b, f
        self._b0 = float(b(0.0))
        if not f.is_local:
            x = op.grid
            self._matrix = f(x[:, None] - x[None, :]) * op.dx
            self._edge = 0.5 * op.dx * self._b0 * (f(x) + f(x - op.length))

    def nodal(self, v_delayed) -> np.ndarray:
        w = self.b(to_nodal(self.op, v_delayed))
        if self.f.is_local:
            return w
        g = self._matrix @ w
        if self._b0 != 0.0:
            g = g + self._edge
        return g

    def __call__(self, v_delayed) -> np.ndarray:
        return to_modal(self.op, self.nodal(v_delayed))


def eval_F(op: SpectralOperator, b: BirthFunction, f: Kernel, v_delayed) -> np.ndarray:
    return ReactionTerm(op, b, f)(v_delayed)


def f_norm_bound(b: BirthFunction, f: Kernel, op: SpectralOperator) -> float:
    """M_f |Omega|^(3/2) C_b, the uniform bound on ||F|| for bounded b."""
    if not b.is_bounded:
        raise Unsupported(f"the ||F|| bound needs a bounded b; {b.variant} has C1={b.C1}")
    if b.C_b == 0.0:
        return 0.0
    return f.bound * op.volume ** 1.5 * b.C_b


def lipschitz_constant(b: BirthFunction, f: Kernel, op: SpectralOperator) -> float:
    """Lipschitz constant of F on L²: M_f |Omega| L_b, or L_b for the local form."""
    if f.is_local:
        return b.lipschitz
    if b.lipschitz == 0.0:
        return 0.0
    return f.bound * op.volume * b.lipschitz
