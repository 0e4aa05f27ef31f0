"""Executable checks of the well-posedness and dissipativity estimates.

Every analytic constant is assembled by one function from its closed form.
Verdicts are one-sided: observed <= analytic * (1 + tol).  Nothing here
asserts that a bound is tight.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .delays import check_H, constant_delay, integral_delay, multi_point_delay, \
    p_of_integral_delay, point_delay, reads_present_state_delay
from .errors import InvalidArgument, Unsupported
from .history import InitialFunction, uniform_theta
from .integrator import ProblemSpec, SolverOptions, Trajectory, plan_grid, solve, sup_deviation
from .nonlinearity import ReactionTerm, f_norm_bound

BOUND_RTOL = 1e-6
BALL_SLACK = 0.05


# -- closed-form constants ---------------------------------------------------

def D_delta(delta: float) -> float:
    """e^-(delta+1/2) (delta+1/2)^(delta+1/2)."""
    x = delta + 0.5
    return math.exp(-x) * x ** x


def compute_D_hat(delta: float) -> float:
    """e^-(1+delta) (1+delta)^(1+delta), the constant of the Lipschitz-in-time variant."""
    x = 1.0 + delta
    return math.exp(-x) * x ** x


def apriori_constant(phi0_norm: float, d: float, t: float, F_bound: float) -> float:
    """Gronwall bound on ||u(t)|| for bounded b, as printed for d > 0.

    ||phi(0)|| + d [||phi(0)|| e^{dt}/d + e^{dt} K d^-2 (1 - e^{-dt}(dt - 1))] + t K
    with K = M_f |Omega|^(3/2) C_b.  At d = 0 the d-terms drop out of the
    integral inequality and the bound is ||phi(0)|| + t K.
    """
    if d < 0 or t < 0:
        raise InvalidArgument("apriori bound needs d >= 0 and t >= 0")
    if d == 0.0:
        return phi0_norm + t * F_bound
    edt = math.exp(d * t)
    psi = phi0_norm / d * edt + edt * F_bound / d ** 2 * (1.0 - math.exp(-d * t) * (d * t - 1.0))
    return phi0_norm + d * psi + t * F_bound


def dissipation_radius(delta: float, F_bound: float, lambda1: float, d: float) -> float:
    """sqrt(M_f² |Omega|³ C_b² lambda_1^(4 delta - 2) / (lambda_1 + 2 d))."""
    if not 0.0 <= delta < 0.5:
        raise InvalidArgument(f"delta must lie in [0, 1/2), got {delta}")
    return math.sqrt(F_bound ** 2 * lambda1 ** (4 * delta - 2) / (lambda1 + 2 * d))


def dissipation_envelope(start_sq: float, t: np.ndarray, delta: float, F_bound: float,
                         lambda1: float, d: float) -> np.ndarray:
    """sqrt(X0 e^{-(lambda_1 + 2d) t} + R(delta)²), t measured from the start time."""
    R = dissipation_radius(delta, F_bound, lambda1, d)
    return np.sqrt(start_sq * np.exp(-(lambda1 + 2 * d) * np.asarray(t)) + R * R)


def holder_constant(delta: float, t1: float, t2: float, phi0_norm: float, G_max: float) -> float:
    """L(delta, t1, t2, phi) for 0 < t1 <= t2.

    D_delta min(t1,t2)^-(delta+1/2) ||phi(0)||
      + [D_delta t1^(1/2-delta) / (1/2-delta) + delta^delta / (e (1-delta))] G_max,
    G_max = max over [0, t2] of ||F(u_tau) + d u(tau)||.
    """
    if not 0.0 <= delta < 0.5:
        raise InvalidArgument(f"delta must lie in [0, 1/2), got {delta}")
    t1, t2 = min(t1, t2), max(t1, t2)
    if not t1 > 0:
        raise InvalidArgument("Hölder constant needs t1 > 0")
    D = D_delta(delta)
    dd = delta ** delta if delta > 0 else 1.0
    return (D * t1 ** -(delta + 0.5) * phi0_norm
            + (D * t1 ** (0.5 - delta) / (0.5 - delta) + dd / (math.e * (1.0 - delta))) * G_max)


# -- reports -----------------------------------------------------------------

@dataclass
class Report:
    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if not k.startswith("_")}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


@dataclass
class AprioriReport(Report):
    T: float
    analytic: float
    observed: float
    F_bound: float
    max_F_norm: float
    passed: bool


@dataclass
class DissipationReport(Report):
    delta: float
    radius: float
    ball: float
    initial_norm: float
    entry_time: float | None
    max_after_entry: float | None
    max_envelope_ratio: float
    envelope_rate: float
    fitted_rate: float | None
    passed: bool
    trajectory: Trajectory | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.pop("trajectory", None)
        return out


@dataclass
class HolderReport(Report):
    delta: float
    interval: tuple
    n_pairs: int
    L_uniform: float
    max_ratio: float
    L_at_max_ratio: float
    min_margin: float
    passed: bool


@dataclass
class DependenceReport(Report):
    T: float
    eps: list
    deviations: dict
    strictly_decreasing: dict
    final: dict
    zero_perturbation: float
    schedule_unchanged: dict
    passed: bool


# -- helpers -----------------------------------------------------------------

def _require_bounded(spec: ProblemSpec) -> float:
    if not spec.b.is_bounded:
        raise Unsupported(f"needs a bounded b; {spec.b.variant} has C1={spec.b.C1}")
    if spec.f.is_local and spec.b.C_b > 0:
        raise Unsupported("the ||F|| bound needs a bounded kernel")
    return 0.0 if spec.b.C_b == 0.0 else f_norm_bound(spec.b, spec.f, spec.op)


def reaction_along(traj: Trajectory) -> np.ndarray:
    """F(u_t) at every node, using the realized delays."""
    rt = ReactionTerm(traj.op, traj.spec.b, traj.spec.f)
    hist = traj.history()
    return np.array([rt(hist.at(float(t)).eval_at(float(t) - tau))
                     for t, tau in zip(traj.times, traj.delays)])


# -- checks ------------------------------------------------------------------

def apriori_bound(spec: ProblemSpec, T: float, opts: SolverOptions | None = None,
                  traj: Trajectory | None = None) -> AprioriReport:
    F_bound = _require_bounded(spec)
    opts = opts or SolverOptions()
    traj = traj or solve(spec, opts, T)
    phi0 = float(np.linalg.norm(spec.phi.at_zero))
    analytic = apriori_constant(phi0, spec.d, traj.T, F_bound)
    observed = float(np.max(traj.norms()))
    max_F = float(np.max(np.linalg.norm(reaction_along(traj), axis=1)))
    ok = observed <= analytic * (1 + BOUND_RTOL) and max_F <= F_bound * (1 + BOUND_RTOL)
    return AprioriReport(traj.T, analytic, observed, F_bound, max_F, bool(ok))


def _entry_index(norms: np.ndarray, times: np.ndarray, ball: float, window: float) -> int | None:
    """First node after which the norm stays in the ball for a full window."""
    inside = norms <= ball
    n = norms.size
    # bad_after[i]: index of the first node >= i outside the ball (n if none)
    bad_after = np.full(n + 1, n)
    for i in range(n - 1, -1, -1):
        bad_after[i] = bad_after[i + 1] if inside[i] else i
    for i in range(n):
        if not inside[i]:
            continue
        if times[i] + window > times[-1] + 1e-12:
            return None
        j = int(np.searchsorted(times, times[i] + window - 1e-12, side="left"))
        if bad_after[i] > j:
            return i
    return None


def dissipativity_check(spec: ProblemSpec, deltas: Iterable[float], T: float,
                        opts: SolverOptions | None = None, burn_in: float = 0.0,
                        traj: Trajectory | None = None) -> list[DissipationReport]:
    """Entry into and confinement to the absorbing ball of radius R(delta).

    The transient is compared with the Gronwall envelope started at
    ``burn_in``.  With C_b = 0 the radius is zero and only the envelope
    (pure decay) is checked.
    """
    F_bound = _require_bounded(spec)
    opts = opts or SolverOptions()
    traj = traj or solve(spec, opts, T)
    lam1, d = traj.op.lambda1, spec.d
    reports = []
    for delta in deltas:
        R = dissipation_radius(delta, F_bound, lam1, d)
        ball = R * (1 + BALL_SLACK)
        norms = traj.frac_norms(delta)
        i0 = int(np.searchsorted(traj.times, burn_in - 1e-12))
        env = dissipation_envelope(norms[i0] ** 2, traj.times[i0:] - traj.times[i0], delta, F_bound, lam1, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(env > 0, norms[i0:] / env, np.where(norms[i0:] > 0, np.inf, 0.0))
        env_ratio = float(np.max(ratios))
        env_ok = env_ratio <= 1 + BALL_SLACK
        rate = lam1 + 2 * d
        if R == 0.0:
            entry, max_after = None, None
            ok = env_ok
            transient = slice(i0, norms.size)
        else:
            idx = _entry_index(norms, traj.times, ball, spec.r)
            if idx is None:
                entry, max_after, ok = None, None, False
                transient = slice(i0, norms.size)
            else:
                entry = float(traj.times[idx])
                max_after = float(np.max(norms[idx:]))
                ok = max_after <= ball and env_ok
                transient = slice(i0, max(idx, i0))
        fitted = _fit_rate(traj.times[transient], norms[transient], ball)
        reports.append(DissipationReport(
            delta=float(delta), radius=R, ball=ball, initial_norm=float(traj.phi.sup_norm()),
            entry_time=entry, max_after_entry=max_after, max_envelope_ratio=env_ratio,
            envelope_rate=rate, fitted_rate=fitted, passed=bool(ok),
            trajectory=None if ok else traj))
    return reports


def _fit_rate(t: np.ndarray, norms: np.ndarray, ball: float) -> float | None:
    """Decay rate of ||A^delta u||² fitted while well outside the ball."""
    keep = norms > max(2.0 * ball, 1e-300)
    if np.count_nonzero(keep) < 3:
        return None
    slope = np.polyfit(t[keep], np.log(norms[keep] ** 2), 1)[0]
    return float(-slope)


def scaled_to(spec: ProblemSpec, target_sup_norm: float) -> ProblemSpec:
    """Same problem, initial function rescaled to the given C-norm."""
    current = spec.phi.sup_norm()
    if current == 0.0:
        raise InvalidArgument("cannot rescale a zero initial function")
    return spec.with_phi(spec.phi.scaled(target_sup_norm / current))


def absorbing_set_check(spec: ProblemSpec, deltas: Iterable[float], T: float,
                        opts: SolverOptions | None = None,
                        factors: Iterable[float] = (0.1, 1.0, 10.0, 100.0)) -> list[DissipationReport]:
    """Dissipativity from initial data of C-norm factor * R(delta)."""
    F_bound = _require_bounded(spec)
    opts = opts or SolverOptions()
    out = []
    for delta in deltas:
        R = dissipation_radius(delta, F_bound, spec.op.lambda1, spec.d)
        for fac in factors:
            scaled = scaled_to(spec, fac * R) if R > 0 else spec
            out.extend(dissipativity_check(scaled, [delta], T, opts))
    return out


def _holder_uniform(delta: float, a: float, b: float, phi0_norm: float, G_max: float) -> float:
    # first term is worst at t1 = a, the bracket at t1 = b
    D = D_delta(delta)
    dd = delta ** delta if delta > 0 else 1.0
    return (D * a ** -(delta + 0.5) * phi0_norm
            + (D * b ** (0.5 - delta) / (0.5 - delta) + dd / (math.e * (1.0 - delta))) * G_max)


def holder_check(spec: ProblemSpec, delta: float, interval: tuple[float, float], n_pairs: int = 500,
                 opts: SolverOptions | None = None, seed: int = 0,
                 traj: Trajectory | None = None) -> HolderReport:
    """Sampled ||A^delta (u(t1) - u(t2))|| / sqrt|t1 - t2| against L(delta, t1, t2, phi)."""
    if not 0.0 <= delta < 0.5:
        raise InvalidArgument(f"delta must lie in [0, 1/2), got {delta}")
    a, b = interval
    if not 0 < a <= b:
        raise InvalidArgument("Hölder interval must satisfy 0 < a <= b")
    opts = opts or SolverOptions()
    traj = traj or solve(spec, opts, b)
    times = traj.times
    G = np.linalg.norm(reaction_along(traj) + spec.d * traj.states, axis=1)
    G_prefix = np.maximum.accumulate(G)
    lo = int(np.searchsorted(times, a - 1e-12))
    hi = int(np.searchsorted(times, b + 1e-12, side="right")) - 1
    if hi < lo:
        raise InvalidArgument("no trajectory nodes inside the Hölder interval")
    rng = np.random.default_rng(seed)
    i1 = rng.integers(lo, hi + 1, size=n_pairs)
    i2 = rng.integers(lo, hi + 1, size=n_pairs)
    phi0 = float(np.linalg.norm(traj.phi.at_zero))
    weights = traj.op.eigenvalues ** (2 * delta)
    max_ratio, L_at, min_margin, ok = 0.0, 0.0, math.inf, True
    for p, q in zip(i1, i2):
        p, q = min(p, q), max(p, q)
        t1, t2 = float(times[p]), float(times[q])
        L = holder_constant(delta, t1, t2, phi0, float(G_prefix[q]))
        if p == q:
            ratio = 0.0
        else:
            diff = traj.states[p] - traj.states[q]
            ratio = math.sqrt(float(np.sum(weights * diff * diff))) / math.sqrt(t2 - t1)
        if ratio > max_ratio:
            max_ratio, L_at = ratio, L
        min_margin = min(min_margin, L - ratio)
        ok = ok and ratio <= L
    L_uniform = _holder_uniform(delta, a, b, phi0, float(G_prefix[hi]))
    return HolderReport(float(delta), (float(a), float(b)), int(n_pairs), L_uniform, max_ratio, L_at,
                        float(min_margin), bool(ok))


def perturbation_directions(spec: ProblemSpec, opts: SolverOptions, T: float) -> dict[str, InitialFunction]:
    """Unit C-norm perturbations on the solver's theta grid.

    ``full``: constant in theta; ``past``: a hat supported in
    [-r, -eta_ign]; ``recent``: a ramp supported in (-eta_ign/2, 0].
    """
    plan = plan_grid(spec, opts, T)
    theta = uniform_theta(spec.r, plan.n_theta)
    spacing = spec.r / plan.n_theta
    N = spec.op.n_modes
    k = np.arange(1, N + 1)
    shape = ((-1.0) ** (k + 1)) / k
    shape /= np.linalg.norm(shape)
    ign = spec.eta.eta_ign
    out = {"full": InitialFunction(theta, np.tile(shape, (theta.size, 1)))}
    if ign < spec.r - spacing:
        lo, hi = -spec.r, -ign
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        g = np.clip(1.0 - np.abs(theta - mid) / half, 0.0, None)
        g[theta >= hi - 0.5 * spacing] = 0.0
        if np.max(g) > 0:
            out["past"] = InitialFunction(theta, np.outer(g / np.max(g), shape))
    start = -0.5 * ign
    g = np.where(theta > start + 0.5 * spacing, (theta - start) / (-start), 0.0)
    out["recent"] = InitialFunction(theta, np.outer(g, shape))
    return out


def continuous_dependence(spec: ProblemSpec, T: float, opts: SolverOptions | None = None,
                          directions: dict[str, InitialFunction] | None = None,
                          eps_ladder: Iterable[float] = tuple(10.0 ** -k for k in range(1, 7)),
                          final_tol: float = 1e-4) -> DependenceReport:
    """sup over [-r, T] of ||u^eps - u|| down an epsilon ladder, per direction.

    For the ``recent`` direction the delay schedule must be bit-identical
    at first-step nodes whose delay reads only unperturbed history.
    """
    opts = opts or SolverOptions()
    directions = directions or perturbation_directions(spec, opts, T)
    eps_ladder = [float(e) for e in eps_ladder]
    base = solve(spec, opts, T)
    zero = sup_deviation(base, solve(spec, opts, T))
    devs, dec, final, sched_ok = {}, {}, {}, {}
    for name, psi in directions.items():
        row = []
        for eps in eps_ladder:
            pert = spec.with_phi(spec.phi.resampled(base.phi.theta.size - 1).plus(psi.scaled(eps)))
            traj = solve(pert, opts, T)
            row.append(sup_deviation(base, traj))
            if name == "recent" and eps == eps_ladder[0]:
                sched_ok[name] = _schedule_unchanged_where_unread(base, traj, psi)
        devs[name] = row
        dec[name] = bool(all(x > y for x, y in zip(row, row[1:])))
        final[name] = row[-1]
    ok = zero == 0.0 and all(dec.values()) and all(v < final_tol for v in final.values()) \
        and all(sched_ok.values())
    return DependenceReport(float(base.T), eps_ladder, devs, dec, final, zero, sched_ok, bool(ok))


def _schedule_unchanged_where_unread(base: Trajectory, pert: Trajectory, psi: InitialFunction) -> bool:
    """Delays must agree exactly wherever the read zone [t-r, t-eta_ign] misses supp(psi)."""
    support = psi.theta[np.linalg.norm(psi.values, axis=1) > 0]
    if support.size == 0:
        return bool(np.array_equal(base.delays, pert.delays))
    first_nonzero = float(support.min())
    # the piecewise-linear perturbation is zero up to the node preceding its support
    prev = psi.theta[np.searchsorted(psi.theta, first_nonzero) - 1]
    ign = base.spec.eta.eta_ign
    mask = base.times - ign <= prev
    mask &= base.times <= base.macro_step + 1e-12
    if not np.any(mask):
        return True
    return bool(np.array_equal(base.delays[mask], pert.delays[mask]))


def restart_discrepancy(spec: ProblemSpec, opts: SolverOptions, t1: float, t2: float) -> float:
    """sup-norm gap between solving to t1 + t2 and solving to t1 then restarting for t2."""
    whole = solve(spec, opts, t1 + t2)
    first = solve(spec, opts, t1)
    second = solve(spec.with_phi(first.initial_function_at(first.T)), opts, t2)
    tail = whole.states[first.times.size - 1:]
    if tail.shape != second.states.shape:
        raise InvalidArgument("restart grids are not aligned; choose t1 on the macro grid")
    return float(np.max(np.linalg.norm(tail - second.states, axis=1)))


def constant_delay_oracle(spec: ProblemSpec, T: float, h: float, refine: int = 10) -> Trajectory:
    """Reference solution for constant delay, Dirac kernel and linear b.

    Each mode obeys u_k' = -(lambda_k + d) u_k + c u_k(t - tau); modes are
    advanced side by side with classical RK4 at step h/refine (shrunk to at
    most tau), with cubic Hermite dense output for the delayed argument.
    """
    eta, b = spec.eta, spec.b
    if eta.variant != "constant":
        raise Unsupported("the oracle needs a constant delay")
    if not spec.f.is_local:
        raise Unsupported("the oracle needs the Dirac (local) kernel")
    if b.variant not in ("linear", "zero"):
        raise Unsupported("the oracle needs a linear b")
    c = b.c if b.variant == "linear" else 0.0
    tau = eta.clamp(eta.value)[0]
    mu = spec.op.eigenvalues + spec.d
    theta, phi_vals = spec.phi.theta, spec.phi.values

    if tau == 0.0:
        n = math.ceil(T / h - 1e-9) * refine
        times = np.arange(n + 1) * (h / refine)
        states = np.exp(np.outer(times, c - mu)) * phi_vals[-1]
        return _oracle_traj(spec, times, states, tau, h / refine)

    sub = max(1, math.ceil(h / (refine * tau) - 1e-9))
    step = h / (refine * sub)
    n = math.ceil(T / h - 1e-9) * refine * sub
    times = np.arange(n + 1) * step
    u = np.empty((n + 1, mu.size))
    du = np.empty_like(u)

    def past(s: float) -> np.ndarray:
        if s <= 0.0:
            return np.array([np.interp(s, theta, phi_vals[:, k]) for k in range(mu.size)])
        i = min(int(s / step), n - 1)
        while times[i] > s:
            i -= 1
        while times[i + 1] < s:
            i += 1
        x = (s - times[i]) / step
        h00 = 2 * x ** 3 - 3 * x ** 2 + 1
        h10 = x ** 3 - 2 * x ** 2 + x
        h01 = -2 * x ** 3 + 3 * x ** 2
        h11 = x ** 3 - x ** 2
        return h00 * u[i] + h10 * step * du[i] + h01 * u[i + 1] + h11 * step * du[i + 1]

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return -mu * y + c * past(t - tau)

    u[0] = phi_vals[-1]
    du[0] = rhs(0.0, u[0])
    for i in range(n):
        t = times[i]
        y = u[i]
        k1 = du[i]
        k2 = rhs(t + step / 2, y + step / 2 * k1)
        k3 = rhs(t + step / 2, y + step / 2 * k2)
        k4 = rhs(t + step, y + step * k3)
        u[i + 1] = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        du[i + 1] = rhs(times[i + 1], u[i + 1])
    return _oracle_traj(spec, times, u, tau, step)


def _oracle_traj(spec, times, states, tau, step) -> Trajectory:
    return Trajectory(times, states, np.full(times.size, tau), spec.phi, spec, step, spec.eta.eta_ign, "oracle")


def oracle_discrepancy(traj: Trajectory, oracle: Trajectory) -> float:
    """max over the solver's nodes of the L² gap to the reference."""
    ratio = traj.h / oracle.h
    stride = int(round(ratio))
    if not math.isclose(stride, ratio, rel_tol=1e-9):
        raise InvalidArgument("oracle step must divide the solver step")
    ref = oracle.states[::stride][:traj.states.shape[0]]
    if ref.shape != traj.states.shape:
        raise InvalidArgument("oracle horizon shorter than the trajectory")
    return float(np.max(np.linalg.norm(traj.states - ref, axis=1)))


def ignore_zone_constructors(r: float = 1.0, eta_ign: float = 0.5) -> list:
    """One functional of each shipped kind, for the ignore-property suite."""
    return [
        point_delay("affine_norm", {"a": 0.1, "b": 0.3}, r),
        point_delay("affine_mean", {"a": 0.5, "b": 0.2}, r, offset=eta_ign),
        multi_point_delay([("affine_norm", {"a": 0.0, "b": 0.1}, eta_ign),
                           ("affine_mean", {"a": 0.1, "b": 0.05}, r)], r),
        integral_delay("affine_norm", {"a": 0.0, "b": 0.4}, eta_ign, r),
        p_of_integral_delay("affine_norm", {"a": 0.05, "b": 0.5}, eta_ign, r),
        constant_delay(0.3, r),
    ]


def H_suite(trials: int = 1000, seed: int = 0) -> dict:
    """check_H over every constructor plus the deliberate violator."""
    reports = [check_H(eta, trials, seed) for eta in ignore_zone_constructors()]
    violator = check_H(reads_present_state_delay("affine_norm", {"a": 0.0, "b": 0.1}, 1.0, 0.5), trials, seed)
    ok = all(r.passed for r in reports) and not violator.passed
    return {"passed": ok, "constructors": [asdict(r) for r in reports], "violator": asdict(violator)}
