"""Method-of-steps integrator for the delayed semilinear parabolic problem.

Each macro-step [a, a + D] with D <= eta_ign starts by freezing the delay:
the history up to ``a`` is continued constantly and the delay functional is
evaluated on that extension at every micro node.  Because the functional
ignores the last eta_ign of the segment, these values coincide with the
delays of the true solution.  The resulting time-dependent delay problem is
then advanced with exponential time differencing in modal space, where
exp(-(A + d) h) is exact.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .delays import DelayFunctional
from .errors import ConvergenceError, DivergenceError, InvalidArgument
from .history import HistorySegment, InitialFunction
from .nonlinearity import BirthFunction, Kernel, ReactionTerm, lipschitz_constant
from .spectral import SpectralOperator, frac_power_norms, tail_ratio

log = logging.getLogger(__name__)

MODES = ("etd1", "etd2", "picard")
_OVERFLOW = 1e200


@dataclass(frozen=True)
class ProblemSpec:
    op: SpectralOperator
    d: float
    r: float
    eta: DelayFunctional
    b: BirthFunction
    f: Kernel
    phi: InitialFunction

    def __post_init__(self):
        if self.d < 0:
            raise InvalidArgument(f"damping d must be nonnegative, got {self.d}")
        if not self.r > 0:
            raise InvalidArgument(f"window r must be positive, got {self.r}")
        if not math.isclose(self.eta.r, self.r, rel_tol=1e-12):
            raise InvalidArgument(f"delay functional window {self.eta.r} != r={self.r}")
        if not 0 < self.eta.eta_ign <= self.r * (1 + 1e-12):
            raise InvalidArgument(f"eta_ign={self.eta.eta_ign} must lie in (0, r]")
        if not math.isclose(self.phi.r, self.r, rel_tol=1e-9):
            raise InvalidArgument(f"initial function spans [{-self.phi.r}, 0], expected [{-self.r}, 0]")
        if self.phi.n_modes != self.op.n_modes:
            raise InvalidArgument(f"initial function has {self.phi.n_modes} modes, operator {self.op.n_modes}")

    def with_phi(self, phi: InitialFunction) -> "ProblemSpec":
        return replace(self, phi=phi)


@dataclass(frozen=True)
class SolverOptions:
    h: float = 1e-2
    mode: str = "etd1"
    picard_tol: float = 1e-12
    picard_max_iter: int = 200
    macro_step: float | None = None
    corrector_tol: float = 1e-10
    corrector_max: int = 3

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidArgument(f"solver.h must be positive, got {self.h}")
        if self.mode not in MODES:
            raise InvalidArgument(f"solver.mode must be one of {MODES}, got {self.mode!r}")
        if self.macro_step is not None and not self.macro_step > 0:
            raise InvalidArgument(f"solver.macro_step must be positive, got {self.macro_step}")
        if self.picard_max_iter < 1:
            raise InvalidArgument("picard_max_iter must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    delays: np.ndarray
    phi: InitialFunction
    spec: ProblemSpec
    h: float
    macro_step: float
    mode: str
    macro: list = field(default_factory=list)

    @property
    def op(self) -> SpectralOperator:
        return self.spec.op

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def history(self) -> HistorySegment:
        """The whole solution on [-r, T] as one (unpruned) segment."""
        t = np.concatenate((self.phi.theta[:-1], self.times))
        v = np.concatenate((self.phi.values[:-1], self.states))
        return HistorySegment(t, v, self.spec.r, retain_all=True)

    def segment(self, t: float) -> HistorySegment:
        return self.history().at(t)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def frac_norms(self, delta: float) -> np.ndarray:
        return frac_power_norms(self.op, delta, self.states)

    def index_of(self, t: float) -> int:
        i = int(round(t / self.h))
        if not 0 <= i < self.times.size or not math.isclose(self.times[i], t, rel_tol=1e-9, abs_tol=1e-12):
            raise InvalidArgument(f"t={t} is not a node of this trajectory")
        return i

    def initial_function_at(self, t: float) -> InitialFunction:
        """u_t shifted to [-r, 0], for restarting a solve from time t."""
        hist = self.history()
        i = self.index_of(t)
        t = float(self.times[i])
        times, vals = hist.window_samples(t - self.spec.r, t)
        theta = times - t
        theta[0] = -self.spec.r
        theta[-1] = 0.0
        # t - r can sit an ulp away from a node; drop the near-duplicate sample
        tol = 1e-12 * (1.0 + abs(t))
        keep = np.ones(theta.size, dtype=bool)
        keep[1:-1] = (theta[1:-1] - theta[0] > tol) & (-theta[1:-1] > tol)
        return InitialFunction(theta[keep], vals[keep])

    def counters(self) -> dict:
        keys = ("clamp_events", "corrector_events", "corrector_failures", "picard_iterations")
        out = {k: 0 for k in keys}
        for m in self.macro:
            for k in keys:
                out[k] += int(m.get(k, 0))
        return out


def etd_coefficients(mu: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """exp(-mu h), int_0^h exp(-mu s) ds and the linear-correction weight.

    The third coefficient multiplies (F_{n+1} - F_n) in the second-order
    update; small ``mu h`` uses series to avoid cancellation.
    """
    mu = np.asarray(mu, dtype=float)
    z = mu * h
    E = np.exp(-z)
    small = np.abs(mu) < 1e-8
    safe_mu = np.where(small, 1.0, mu)
    phi1 = np.where(small, h * (1.0 - 0.5 * z), -np.expm1(-z) / safe_mu)
    tiny = np.abs(z) < 1e-3
    safe_z = np.where(tiny, 1.0, z)
    phi2 = np.where(tiny, h * (0.5 - z / 6.0 + z * z / 24.0 - z ** 3 / 120.0),
                    h * (safe_z + np.expm1(-safe_z)) / (safe_z * safe_z))
    return E, phi1, phi2


def step_micro_etd1(op: SpectralOperator, d: float, h: float, u_n, F_n) -> np.ndarray:
    """u(t+h) = exp(-(A+d)h) u(t) + (1 - exp(-(A+d)h)) (A+d)^-1 F."""
    if not h > 0:
        raise InvalidArgument(f"micro-step must be positive, got {h}")
    E, phi1, _ = etd_coefficients(op.eigenvalues + d, h)
    return E * np.asarray(u_n, dtype=float) + phi1 * np.asarray(F_n, dtype=float)


def step_micro_etd2(op: SpectralOperator, d: float, h: float, u_n, F_n, F_next) -> np.ndarray:
    E, phi1, phi2 = etd_coefficients(op.eigenvalues + d, h)
    F_n = np.asarray(F_n, dtype=float)
    return E * np.asarray(u_n, dtype=float) + phi1 * F_n + phi2 * (np.asarray(F_next, dtype=float) - F_n)


def _schedule(eta: DelayFunctional, frozen: HistorySegment, times) -> tuple[np.ndarray, int]:
    out = np.empty(len(times))
    clamps = 0
    for i, t in enumerate(times):
        val, clamped = eta.clamp(eta.raw(frozen.at(float(t))))
        out[i] = val
        clamps += clamped
    return out, clamps


def delay_schedule(eta: DelayFunctional, frozen: HistorySegment, a: float, length: float,
                   micro_times) -> np.ndarray:
    """Delays at the micro nodes of [a, a + length], read from the frozen past.

    ``frozen`` must end at ``a``; it is continued constantly past ``a``.
    """
    if length > eta.eta_ign * (1 + 1e-12):
        raise InvalidArgument(f"macro-step {length} exceeds eta_ign={eta.eta_ign}; "
                              "the delay would depend on the unknown state")
    if not math.isclose(frozen.t_last, a, rel_tol=1e-12, abs_tol=1e-14):
        raise InvalidArgument(f"frozen history ends at {frozen.t_last}, expected {a}")
    micro_times = np.asarray(micro_times, dtype=float)
    until = max(float(micro_times.max()), a + length)
    ext = frozen.extended(until=until) if until > frozen.t_last else frozen
    return _schedule(eta, ext, micro_times)[0]


@dataclass
class _Plan:
    macro: float
    per_macro: int
    h: float
    n_total: int
    n_theta: int


def plan_grid(spec: ProblemSpec, opts: SolverOptions, T: float) -> _Plan:
    if not T > 0:
        raise InvalidArgument(f"final time T must be positive, got {T}")
    macro = spec.eta.eta_ign if opts.macro_step is None else opts.macro_step
    if macro > spec.eta.eta_ign * (1 + 1e-12):
        raise InvalidArgument(f"solver.macro_step={macro} exceeds eta_ign={spec.eta.eta_ign}")
    per = max(1, math.ceil(macro / opts.h - 1e-9))
    h = macro / per
    n_total = max(1, math.ceil(T / h - 1e-9))
    n_theta = max(1, math.ceil(spec.r / h - 1e-9))
    return _Plan(macro, per, h, n_total, n_theta)


class _Lookup:
    """Delayed-state lookup across stored history and a tentative local block."""

    def __init__(self, hist: HistorySegment, t0: float, times: np.ndarray, block: np.ndarray):
        self.hist, self.t0, self.times, self.block = hist, t0, times, block

    def __call__(self, s: float) -> np.ndarray:
        if s <= self.t0:
            return self.hist.eval_at(s)
        i = int(np.searchsorted(self.times, s, side="right")) - 1
        t0 = self.times[i]
        if s == t0 or i + 1 >= self.times.size:
            return self.block[i].copy()
        w = (s - t0) / (self.times[i + 1] - t0)
        return (1.0 - w) * self.block[i] + w * self.block[i + 1]


def _check_finite(u: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > _OVERFLOW:
        raise DivergenceError(t)


def solve(spec: ProblemSpec, opts: SolverOptions, T: float) -> Trajectory:
    """Integrate on [0, T] (rounded up to whole micro-steps)."""
    if opts.mode == "picard":
        return solve_picard(spec, opts, T)
    plan = plan_grid(spec, opts, T)
    h = plan.h
    op = spec.op
    phi = spec.phi.resampled(plan.n_theta)
    rt = ReactionTerm(op, spec.b, spec.f)
    E, phi1, phi2 = etd_coefficients(op.eigenvalues + spec.d, h)
    second_order = opts.mode == "etd2"

    times = np.arange(plan.n_total + 1) * h
    states = np.empty((plan.n_total + 1, op.n_modes))
    delays = np.empty(plan.n_total + 1)
    states[0] = phi.at_zero
    hist = HistorySegment(phi.theta, phi.values, spec.r)
    macro_meta = []

    n = 0
    while n < plan.n_total:
        n_end = min(n + plan.per_macro, plan.n_total)
        node_times = times[n:n_end + 1]
        ext = hist.extended(until=float(times[n_end]))
        sched, clamps = _schedule(spec.eta, ext, node_times)
        delays[n:n_end + 1] = sched
        meta = {"t_start": float(times[n]), "t_end": float(times[n_end]), "clamp_events": clamps,
                "corrector_events": 0, "corrector_iterations": 0, "corrector_failures": 0,
                "max_tail_ratio": 0.0}
        for j in range(n, n_end):
            k = j - n
            t_j = float(times[j])
            u_j = states[j]
            F_j = rt(hist.eval_at(t_j - sched[k]))
            u_new = E * u_j + phi1 * F_j
            if second_order:
                s_next = float(times[j + 1]) - sched[k + 1]
                if s_next <= t_j:
                    u_new = u_new + phi2 * (rt(hist.eval_at(s_next)) - F_j)
                else:
                    u_new = _corrected_step(rt, E, phi1, phi2, u_j, F_j, t_j, h, s_next, opts, meta)
            _check_finite(u_new, float(times[j + 1]))
            states[j + 1] = u_new
            hist.push(float(times[j + 1]), u_new)
            meta["max_tail_ratio"] = max(meta["max_tail_ratio"], tail_ratio(u_new))
        macro_meta.append(meta)
        n = n_end

    return Trajectory(times, states, delays, phi, spec, h, plan.macro, opts.mode, macro_meta)


def _corrected_step(rt, E, phi1, phi2, u_j, F_j, t_j, h, s_next, opts, meta):
    """Second-order step whose delayed point lies inside (t_j, t_j + h].

    Constant predictor for the delayed value, then up to ``corrector_max``
    fixed-point corrections through linear interpolation on the step.
    """
    meta["corrector_events"] += 1
    base = E * u_j + phi1 * F_j
    u_new = base + phi2 * (rt(u_j) - F_j)
    w = (s_next - t_j) / h
    converged = False
    for _ in range(opts.corrector_max):
        meta["corrector_iterations"] += 1
        v_del = (1.0 - w) * u_j + w * u_new
        u_next = base + phi2 * (rt(v_del) - F_j)
        change = float(np.linalg.norm(u_next - u_new))
        u_new = u_next
        if change < opts.corrector_tol:
            converged = True
            break
    if not converged:
        meta["corrector_failures"] += 1
        log.warning("vanishing-delay corrector did not reach %.1e at t=%.6g", opts.corrector_tol, t_j + h)
    return u_new


def picard_subinterval(spec: ProblemSpec, h: float, macro: float) -> tuple[int, float]:
    """Micro-steps per Picard block and its contraction constant.

    Blocks are shrunk until step * (K + d) <= 1/2, K the Lipschitz constant
    of F, so the iteration contracts.
    """
    per_macro = max(1, round(macro / h))
    K = lipschitz_constant(spec.b, spec.f, spec.op) + spec.d
    if K == 0.0 or not math.isfinite(K):
        return per_macro, 0.0 if K == 0.0 else math.inf
    q = max(1, min(per_macro, math.floor(0.5 / (K * h))))
    return q, q * h * K


def solve_picard(spec: ProblemSpec, opts: SolverOptions, T: float) -> Trajectory:
    """Method of steps with Picard iteration of the discrete mild-solution map.

    On each block the map sends an iterate w to the exponential-Euler
    recursion driven by F evaluated along w; its fixed point is the etd1
    solution.  Successive sup-norm differences shrink by at most the
    block's contraction constant.
    """
    plan = plan_grid(spec, opts, T)
    h = plan.h
    op = spec.op
    phi = spec.phi.resampled(plan.n_theta)
    rt = ReactionTerm(op, spec.b, spec.f)
    E, phi1, _ = etd_coefficients(op.eigenvalues + spec.d, h)
    q, kappa = picard_subinterval(spec, h, plan.macro)

    times = np.arange(plan.n_total + 1) * h
    states = np.empty((plan.n_total + 1, op.n_modes))
    delays = np.empty(plan.n_total + 1)
    states[0] = phi.at_zero
    hist = HistorySegment(phi.theta, phi.values, spec.r)
    macro_meta = []

    n = 0
    while n < plan.n_total:
        n_end = min(n + plan.per_macro, plan.n_total)
        ext = hist.extended(until=float(times[n_end]))
        sched, clamps = _schedule(spec.eta, ext, times[n:n_end + 1])
        delays[n:n_end + 1] = sched
        meta = {"t_start": float(times[n]), "t_end": float(times[n_end]), "clamp_events": clamps,
                "picard_iterations": 0, "picard_blocks": 0, "kappa": kappa,
                "contraction_ratios": [], "max_tail_ratio": 0.0}
        j0 = n
        while j0 < n_end:
            j1 = min(j0 + q, n_end)
            block_t = times[j0:j1 + 1]
            block_tau = sched[j0 - n:j1 - n + 1]
            w = np.tile(states[j0], (j1 - j0 + 1, 1))
            prev = None
            for it in range(1, opts.picard_max_iter + 1):
                look = _Lookup(hist, float(times[j0]), block_t, w)
                new = np.empty_like(w)
                new[0] = states[j0]
                for i in range(j1 - j0):
                    F_i = rt(look(float(block_t[i]) - block_tau[i]))
                    new[i + 1] = E * new[i] + phi1 * F_i
                diff = float(np.max(np.linalg.norm(new - w, axis=1)))
                if prev is not None and prev > 1e-13:
                    meta["contraction_ratios"].append(diff / prev)
                w = new
                prev = diff
                if diff < opts.picard_tol:
                    break
            else:
                raise ConvergenceError(f"Picard iteration did not reach {opts.picard_tol:.1e} "
                                       f"within {opts.picard_max_iter} iterations at t={times[j0]:.6g}")
            meta["picard_iterations"] += it
            meta["picard_blocks"] += 1
            for i in range(1, j1 - j0 + 1):
                _check_finite(w[i], float(block_t[i]))
                states[j0 + i] = w[i]
                hist.push(float(block_t[i]), w[i])
                meta["max_tail_ratio"] = max(meta["max_tail_ratio"], tail_ratio(w[i]))
            j0 = j1
        macro_meta.append(meta)
        n = n_end

    return Trajectory(times, states, delays, phi, spec, h, plan.macro, "picard", macro_meta)


def recheck_schedule(traj: Trajectory, eta: DelayFunctional | None = None) -> np.ndarray:
    """|eta(u_t) - schedule(t)| at every node, eta re-read from the finished solution."""
    eta = traj.spec.eta if eta is None else eta
    hist = traj.history()
    post = np.array([eta(hist.at(float(t))) for t in traj.times])
    return np.abs(post - traj.delays)


def sup_deviation(a: Trajectory, b: Trajectory) -> float:
    """sup over s in [-r, T] of ||u_a(s) - u_b(s)|| on a shared grid."""
    if a.times.size != b.times.size or not np.array_equal(a.times, b.times):
        raise InvalidArgument("trajectories must share a time grid")
    if not np.array_equal(a.phi.theta, b.phi.theta):
        raise InvalidArgument("trajectories must share a theta grid")
    dev_hist = np.max(np.linalg.norm(a.phi.values - b.phi.values, axis=1))
    dev = np.max(np.linalg.norm(a.states - b.states, axis=1))
    return float(max(dev_hist, dev))


def write_trajectory_csv(path, traj: Trajectory, deltas=(0.25,), probes=()) -> None:
    """t, ||u||, ||A^delta u|| per delta, eta(u_t), u(t, x) per probe; 17 digits."""
    deltas = [float(x) for x in deltas]
    probes = [float(x) for x in probes]
    header = ["t", "norm"] + [f"frac_norm_{x:g}" for x in deltas] + ["eta"] + [f"u_at_{x:g}" for x in probes]
    cols = [traj.times, traj.norms()] + [traj.frac_norms(x) for x in deltas] + [traj.delays]
    if probes:
        pv = np.array([traj.op.evaluate(v, probes) for v in traj.states])
        cols += [pv[:, i] for i in range(len(probes))]
    data = np.column_stack(cols)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([format(float(x), ".17g") for x in row])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    return {name: body[:, i] for i, name in enumerate(header)}
