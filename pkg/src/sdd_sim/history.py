"""Solution segments u_t over a trailing window [t - r, t].

Values between samples are linear in time.  A segment may carry a *hold*
horizon past its last sample, on which it is continued by the last stored
value; this realizes the constant extension used to freeze the delay while
the solution on the next step is still unknown.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidArgument, OutOfWindowError
from .spectral import SpectralOperator, to_modal

_REL_TOL = 1e-12


class HistorySegment:
    """Time-ordered samples ``(t_i, v_i)`` and a current time ``t_now``.

    ``push`` appends in place and discards samples older than one sample
    before ``t_now - r``.  ``at(t)`` returns a cheap view of the same data with
    a different current time; views must not outlive later pushes.
    """

    def __init__(self, times, values, r: float, t_now: float | None = None,
                 hold_until: float | None = None, retain_all: bool = False):
        times = np.array(times, dtype=float)
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != times.shape[0]:
            raise InvalidArgument("values must be a (n_samples, n_modes) array matching times")
        if times.size == 0:
            raise InvalidArgument("a history needs at least one sample")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise InvalidArgument("sample times must be strictly increasing")
        if not r > 0:
            raise InvalidArgument(f"window length must be positive, got {r}")
        self.r = float(r)
        self._t = times
        self._v = values
        self._lo = 0
        self._hi = times.size
        self.hold_until = None if hold_until is None else float(hold_until)
        self.retain_all = retain_all
        self.t_now = float(times[-1]) if t_now is None else float(t_now)
        if self.t_now > self._horizon():
            raise OutOfWindowError(f"t_now={self.t_now} beyond last sample/hold {self._horizon()}")

    # -- basic views -------------------------------------------------------
    @property
    def times(self) -> np.ndarray:
        return self._t[self._lo:self._hi]

    @property
    def values(self) -> np.ndarray:
        return self._v[self._lo:self._hi]

    @property
    def n_modes(self) -> int:
        return self._v.shape[1]

    def __len__(self) -> int:
        return self._hi - self._lo

    @property
    def t_last(self) -> float:
        return float(self._t[self._hi - 1])

    def _horizon(self) -> float:
        last = float(self._t[self._hi - 1])
        if self.hold_until is not None and self.hold_until > last:
            return self.hold_until
        return last

    def _view(self, t_now: float, hold_until: float | None) -> "HistorySegment":
        seg = object.__new__(HistorySegment)
        seg.r = self.r
        seg._t, seg._v, seg._lo, seg._hi = self._t, self._v, self._lo, self._hi
        seg.hold_until = hold_until
        seg.retain_all = self.retain_all
        seg.t_now = float(t_now)
        return seg

    def at(self, t: float) -> "HistorySegment":
        """The segment u_t, i.e. the same record seen from current time ``t``."""
        if t > self._horizon():
            raise OutOfWindowError(f"t={t} beyond last sample/hold {self._horizon()}")
        return self._view(t, self.hold_until)

    def copy(self) -> "HistorySegment":
        seg = self._view(self.t_now, self.hold_until)
        seg._t = self.times.copy()
        seg._v = self.values.copy()
        seg._lo, seg._hi = 0, seg._t.size
        return seg

    def extended(self, horizon: float | None = None, until: float | None = None) -> "HistorySegment":
        """Copy continued constantly by the last value on (t_last, t_last + horizon].

        ``until`` gives the end of the hold as an absolute time instead.
        """
        seg = self.copy()
        end = seg.t_last + float(horizon) if until is None else float(until)
        if not end > seg.t_last:
            raise InvalidArgument(f"extension must reach past the last sample {seg.t_last}")
        seg.hold_until = end
        return seg

    # -- evaluation --------------------------------------------------------
    def window_start(self) -> float:
        return self.t_now - self.r

    def _check(self, s: float) -> None:
        tol = _REL_TOL * (1.0 + abs(self.t_now))
        if s < self.t_now - self.r - tol or s > self.t_now + tol:
            raise OutOfWindowError(
                f"s={s:.17g} outside window [{self.t_now - self.r:.17g}, {self.t_now:.17g}]")
        if s < self._t[self._lo]:
            raise OutOfWindowError(f"s={s:.17g} precedes the first stored sample {self._t[self._lo]:.17g}")

    def eval_at(self, s: float) -> np.ndarray:
        """u(s) for s in [t_now - r, t_now]; linear between samples."""
        s = float(s)
        self._check(s)
        t = self._t
        last = self._hi - 1
        if s >= t[last]:
            if s == t[last] or self.hold_until is not None:
                return self._v[last].copy()
            raise OutOfWindowError(f"s={s:.17g} after the last sample {t[last]:.17g}")
        i = int(np.searchsorted(t[self._lo:self._hi], s, side="right")) - 1 + self._lo
        t0 = t[i]
        if s == t0:
            return self._v[i].copy()
        t1 = t[i + 1]
        w = (s - t0) / (t1 - t0)
        return (1.0 - w) * self._v[i] + w * self._v[i + 1]

    def window_samples(self, s0: float, s1: float) -> tuple[np.ndarray, np.ndarray]:
        """Sample times and values covering [s0, s1], endpoints interpolated."""
        if s1 < s0:
            raise InvalidArgument("window_samples needs s0 <= s1")
        v0 = self.eval_at(s0)
        v1 = self.eval_at(s1)
        if s1 == s0:
            return np.array([s0]), v0[None, :]
        tt = self.times
        a = int(np.searchsorted(tt, s0, side="right"))
        b = int(np.searchsorted(tt, s1, side="left"))
        inner_t = tt[a:b]
        inner_v = self.values[a:b]
        times = np.concatenate(([s0], inner_t, [s1]))
        vals = np.concatenate((v0[None, :], inner_v, v1[None, :]), axis=0)
        return times, vals

    def sup_norm(self) -> float:
        """||u_t||_C: max of ||u(s)|| over the window (linear pieces peak at nodes)."""
        s0 = self.window_start()
        norms = [np.linalg.norm(self.eval_at(max(s0, float(self._t[self._lo]))))]
        tt = self.times
        a = int(np.searchsorted(tt, s0, side="right"))
        b = int(np.searchsorted(tt, self.t_now, side="right"))
        if b > a:
            norms.append(np.max(np.linalg.norm(self.values[a:b], axis=1)))
        norms.append(np.linalg.norm(self.eval_at(self.t_now)))
        return float(max(norms))

    # -- mutation ----------------------------------------------------------
    def push(self, t_new: float, v) -> None:
        t_new = float(t_new)
        if not t_new > self.t_last:
            raise InvalidArgument(f"push time {t_new!r} must exceed last sample time {self.t_last!r}")
        v = np.asarray(v, dtype=float)
        if self._hi == self._t.size:
            self._make_room()
        self._t[self._hi] = t_new
        self._v[self._hi] = v
        self._hi += 1
        self.t_now = t_new
        self.hold_until = None
        if not self.retain_all:
            k = int(np.searchsorted(self.times, t_new - self.r, side="right")) - 1
            if k > 0:
                self._lo += k

    def _make_room(self) -> None:
        n = self._hi - self._lo
        cap = self._t.size
        if self._lo >= cap // 2 and n < cap:
            t = self._t
            v = self._v
        else:
            cap = max(2 * n, 16)
            t = np.empty(cap)
            v = np.empty((cap, self._v.shape[1]))
        t[:n] = self._t[self._lo:self._hi]
        v[:n] = self._v[self._lo:self._hi]
        self._t, self._v, self._lo, self._hi = t, v, 0, n


def eval_at(h: HistorySegment, s: float) -> np.ndarray:
    return h.eval_at(s)


def push(h: HistorySegment, t_new: float, v) -> HistorySegment:
    h.push(t_new, v)
    return h


def segment_sup_norm(h: HistorySegment) -> float:
    return h.sup_norm()


@dataclass(frozen=True)
class InitialFunction:
    """phi on [-r, 0], sampled at increasing theta with theta[0] = -r, theta[-1] = 0."""

    theta: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if theta.ndim != 1 or theta.size < 2:
            raise InvalidArgument("initial function needs at least two theta samples")
        if values.shape[0] != theta.size:
            raise InvalidArgument("initial function values must have one row per theta sample")
        if np.any(np.diff(theta) <= 0):
            raise InvalidArgument("theta samples must be strictly increasing")
        if theta[-1] != 0.0:
            raise InvalidArgument(f"theta grid must end at 0, ends at {theta[-1]}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> float:
        return float(-self.theta[0])

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    @property
    def at_zero(self) -> np.ndarray:
        return self.values[-1].copy()

    def segment(self) -> HistorySegment:
        return HistorySegment(self.theta, self.values, self.r)

    def eval(self, theta: float) -> np.ndarray:
        return self.segment().eval_at(theta)

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def resampled(self, n_cells: int) -> "InitialFunction":
        """Linear resampling onto the uniform grid with ``n_cells`` cells."""
        grid = uniform_theta(self.r, n_cells)
        if grid.size == self.theta.size and np.array_equal(grid, self.theta):
            return self
        seg = self.segment()
        vals = np.array([seg.eval_at(s) for s in grid])
        return InitialFunction(grid, vals)

    def scaled(self, factor: float) -> "InitialFunction":
        return InitialFunction(self.theta, factor * self.values)

    def plus(self, other: "InitialFunction") -> "InitialFunction":
        if other.theta.size != self.theta.size or not np.array_equal(other.theta, self.theta):
            other = InitialFunction(self.theta, np.array([other.eval(s) for s in self.theta]))
        return InitialFunction(self.theta, self.values + other.values)

    @classmethod
    def from_callable(cls, fn: Callable[[float], np.ndarray], r: float, n_cells: int) -> "InitialFunction":
        grid = uniform_theta(r, n_cells)
        return cls(grid, np.array([np.asarray(fn(s), dtype=float) for s in grid]))

    @classmethod
    def constant(cls, v, r: float, n_cells: int = 1) -> "InitialFunction":
        v = np.asarray(v, dtype=float)
        grid = uniform_theta(r, n_cells)
        return cls(grid, np.tile(v, (grid.size, 1)))


def uniform_theta(r: float, n_cells: int) -> np.ndarray:
    if not r > 0:
        raise InvalidArgument(f"window length must be positive, got {r}")
    if n_cells < 1:
        raise InvalidArgument("need at least one theta cell")
    j = np.arange(n_cells + 1)
    grid = -r * (n_cells - j) / n_cells
    grid[-1] = 0.0
    return grid


def extend(phi: InitialFunction, eta_ign: float) -> HistorySegment:
    """phi on [-r, 0] continued by phi(0) on (0, eta_ign)."""
    if not eta_ign > 0:
        raise InvalidArgument(f"eta_ign must be positive, got {eta_ign}")
    return HistorySegment(phi.theta, phi.values, phi.r, hold_until=float(eta_ign))


def load_initial_csv(path, op: SpectralOperator) -> InitialFunction:
    """Read phi from CSV.

    The header is ``theta`` followed by either ``modal_1..modal_N`` (modal
    coefficients) or ``grid_1..grid_G`` (values on the operator's quadrature
    grid).  Fewer modes than ``op.n_modes`` are zero padded.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgument(f"{path}: empty initial-function file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "theta" or len(header) < 2:
        raise InvalidArgument(f"{path}: first column must be 'theta'")
    kind = header[1].split("_")[0]
    if kind not in ("modal", "grid") or any(not h.startswith(kind + "_") for h in header[1:]):
        raise InvalidArgument(f"{path}: value columns must all be modal_* or all grid_*")
    data = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    theta, vals = data[:, 0], data[:, 1:]
    if kind == "grid":
        if vals.shape[1] != op.n_grid:
            raise InvalidArgument(f"{path}: {vals.shape[1]} grid columns, operator has {op.n_grid}")
        vals = to_modal(op, vals)
    else:
        if vals.shape[1] > op.n_modes:
            raise InvalidArgument(f"{path}: {vals.shape[1]} modal columns, operator has {op.n_modes}")
        vals = np.pad(vals, ((0, 0), (0, op.n_modes - vals.shape[1])))
    return InitialFunction(theta, vals)


def write_initial_csv(path, phi: InitialFunction) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta"] + [f"modal_{k + 1}" for k in range(phi.n_modes)])
        for s, v in zip(phi.theta, phi.values):
            w.writerow([f"{s:.17g}"] + [f"{x:.17g}" for x in v])
