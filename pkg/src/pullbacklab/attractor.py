"""Pullback attractor boundaries and forwards-attraction diagnostics.

The upper boundary b(p) is the decreasing limit of the super-equilibria
u(n*t0, p.(-n*t0), r*e0).  With a reaction term that vanishes identically up to
the threshold r0, the principal direction is neutral and that limit is
approached only algebraically whenever the limiting orbit touches the
threshold; the convergence record therefore keeps every iterate so callers can
(a) verify the monotone squeeze and (b) extrapolate the power-law tail when a
sharper value is needed than honest finite depth can deliver.

In regimes with bounded-backward cocycle evidence and recurrent returns the
boundary lies in the principal direction and never leaves the linear zone, so
it can be built directly from the cocycle (method="principal"); the pullback
iterates then squeeze down onto it from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .driving import BasePoint
from .dynamics import ProblemSpec, absorbing_radius, evolve
from .cocycle import estimate_principal, log_cocycle_grid, principal_unit

STRICTLY_POSITIVE = "strictly_positive"
STRICTLY_NEGATIVE = "strictly_negative"
ZERO = "zero"
MIXED = "mixed"


# -- pullback boundary ---------------------------------------------------------

@dataclass
class PullbackRecord:
    """Convergence evidence for one pullback run."""

    ns: list = field(default_factory=list)          # iterate indices
    depths: list = field(default_factory=list)      # n * t0
    diffs: list = field(default_factory=list)       # sup |b_k - b_prev|
    sups: list = field(default_factory=list)
    states: list = field(default_factory=list)
    converged: bool = False
    monotone_ok: bool = True
    params: dict = field(default_factory=dict)


def _iterate_schedule(n_max: int, schedule: str):
    if schedule == "linear":
        return list(range(1, n_max + 1))
    if schedule != "doubling":
        raise ValueError(f"unknown schedule {schedule!r}")
    ns, n = [], 1
    while n <= n_max:
        ns.append(n)
        n *= 2
    if ns[-1] != n_max:
        ns.append(n_max)
    return ns


def _pullback_run(spec, p, z_start, t0, tol, n_max, schedule, direction):
    rec = PullbackRecord(params={"t0": t0, "tol": tol, "n_max": n_max,
                                 "schedule": schedule})
    prev = None
    for n in _iterate_schedule(n_max, schedule):
        b_n = evolve(spec, p.translate(-n * t0), z_start, n * t0)
        rec.ns.append(n)
        rec.depths.append(n * t0)
        rec.sups.append(spec.basis.sup_norm(b_n))
        rec.states.append(b_n)
        if prev is not None:
            gap = spec.basis.to_grid(prev - b_n) * direction
            rec.diffs.append(float(np.max(np.abs(gap))))
            if np.min(gap) < -1e-8:
                rec.monotone_ok = False
            if rec.diffs[-1] < tol:
                rec.converged = True
                break
        else:
            rec.diffs.append(math.inf)
        prev = b_n
    return rec.states[-1], rec


def pullback_upper_boundary(spec: ProblemSpec, p: BasePoint, r: float | None = None,
                            t0: float = 5.0, tol: float = 1e-6, n_max: int = 400,
                            schedule: str = "doubling"):
    """Iterate b_n(p) = u(n*t0, p.(-n*t0), r*e0) until Cauchy within tol.

    The iterates form a pointwise nonincreasing family (checked within 1e-8);
    if the budget n_max is exhausted first, the best iterate is returned
    flagged unconverged.  The default doubling schedule compares iterates at
    doubled depth, a conservative Cauchy test costing O(total depth); the
    spec-literal consecutive schedule is available as schedule="linear".
    """
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    r_min = absorbing_radius(spec)
    if r is None:
        r = max(r_min, 4.0)
    if r < r_min:
        raise ValueError(f"pullback radius r={r} is below the absorbing radius {r_min}")
    return _pullback_run(spec, p, r * spec.basis.e0, t0, tol, n_max, schedule, +1.0)


def pullback_lower_boundary(spec: ProblemSpec, p: BasePoint, r: float | None = None,
                            t0: float = 5.0, tol: float = 1e-6, n_max: int = 400,
                            schedule: str = "doubling"):
    """Pullback from -r*e0; the iterates increase up to the lower boundary a(p)."""
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    r_min = absorbing_radius(spec)
    if r is None:
        r = max(r_min, 4.0)
    if r < r_min:
        raise ValueError(f"pullback radius r={r} is below the absorbing radius {r_min}")
    return _pullback_run(spec, p, -r * spec.basis.e0, t0, tol, n_max, schedule, -1.0)


def extrapolate_power_law(record: PullbackRecord):
    """Power-law limit estimate from the last three depth-doubled iterates.

    The iterates approach the boundary like C * depth^(-q) whenever the
    limiting orbit touches the linear-zone threshold (q ~ 2/3 for the
    quadratic-excess reaction); three doubled iterates determine the limit.
    Returns (state, info); falls back to the last iterate when no consistent
    power law is visible.
    """
    states, ns = record.states, record.ns
    triple = None
    for k in range(len(ns) - 1, 1, -1):
        if ns[k] == 2 * ns[k - 1] and ns[k - 1] == 2 * ns[k - 2]:
            triple = (states[k - 2], states[k - 1], states[k])
            break
    if triple is None:
        return states[-1], {"extrapolated": False, "reason": "no doubled triple"}
    b1, b2, b4 = triple
    d1 = float(np.max(np.abs(b1 - b2)))
    d2 = float(np.max(np.abs(b2 - b4)))
    if d2 <= 0 or d1 <= d2:
        return states[-1], {"extrapolated": False, "reason": "already converged"}
    rho = d1 / d2
    if rho < 1.05:
        return states[-1], {"extrapolated": False, "reason": "ratio too close to 1"}
    limit = b4 - (b2 - b4) / (rho - 1.0)
    return limit, {"extrapolated": True, "rho": rho,
                   "correction_sup": d2 / (rho - 1.0)}


# -- boundary along an orbit -----------------------------------------------------

@dataclass
class BoundaryTrajectory:
    """Samples of b(p.t) with per-sample convergence metadata."""

    times: np.ndarray
    states: np.ndarray            # (n_times, N)
    residuals: np.ndarray
    converged: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def sup_norms(self, basis) -> np.ndarray:
        return np.array([basis.sup_norm(s) for s in self.states])

    def principal_coeffs(self) -> np.ndarray:
        return self.states[:, 0]


def boundary_trajectory(spec: ProblemSpec, p: BasePoint, t_grid,
                        method: str = "pullback", window=None,
                        m_grid_step: float = 0.05, **pullback_kwargs) -> BoundaryTrajectory:
    """Compute b(p.t) along t_grid.

    method="pullback":  one independent pullback run per sample (honest but
    biased from above by the algebraic tail at threshold-touching orbits).

    method="principal": valid in homogeneous mode under bounded-backward plus
    recurrence evidence, where the boundary is the largest principal-direction
    orbit that never leaves the linear zone: b(p.t) = r0 * c(t,p)/sup c * e,
    with the sup taken over the evidence window.  Exact whenever the evidence
    holds, and the pullback iterates squeeze onto it from above.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if method == "pullback":
        states, residuals, conv = [], [], []
        for t in t_grid:
            b, rec = pullback_upper_boundary(spec, p.translate(t), **pullback_kwargs)
            states.append(b)
            residuals.append(rec.diffs[-1])
            conv.append(rec.converged)
        return BoundaryTrajectory(times=t_grid, states=np.array(states),
                                  residuals=np.array(residuals),
                                  converged=np.array(conv), method="pullback",
                                  meta={"params": pullback_kwargs})
    if method != "principal":
        raise ValueError(f"unknown boundary method {method!r}")
    if not spec.homogeneous:
        raise ValueError("principal boundary construction requires homogeneous mode")
    if window is None:
        window = (min(-2000.0, float(t_grid.min())), max(2000.0, float(t_grid.max())))
    ts_win = np.arange(window[0], window[1] + m_grid_step / 2, m_grid_step)
    m_log = float(np.max(spec.driver.log_cocycle(p, ts_win)))
    lnc = spec.driver.log_cocycle(p, t_grid)
    e_unit = principal_unit(spec)
    r0 = spec.nonlinearity.r0
    states = np.array([r0 * math.exp(v - m_log) * e_unit for v in lnc])
    zeros = np.zeros_like(t_grid)
    return BoundaryTrajectory(times=t_grid, states=states, residuals=zeros,
                              converged=np.ones_like(t_grid, dtype=bool),
                              method="principal",
                              meta={"m_log": m_log, "window": window})


def equilibrium_residual(spec: ProblemSpec, p: BasePoint, b, t_horizon: float = 50.0,
                         n_checkpoints: int = 5, tol: float = 1e-6,
                         boundary_solver=None) -> float:
    """Relative drift of b under the semiflow against independently recomputed b(p.t).

    boundary_solver(spec, q) -> state recomputes the boundary at a translate;
    it defaults to a fresh pullback run with default parameters.
    """
    if boundary_solver is None:
        boundary_solver = lambda s_, q: pullback_upper_boundary(s_, q)[0]
    ts = np.linspace(t_horizon / n_checkpoints, t_horizon, n_checkpoints)
    _, along = evolve(spec, p, np.asarray(b, dtype=float), t_horizon, record_times=ts)
    worst = 0.0
    for t, u_t in zip(ts, along):
        b_t = boundary_solver(spec, p.translate(t))
        num = spec.basis.sup_norm(u_t - b_t)
        den = max(spec.basis.sup_norm(b_t), tol)
        worst = max(worst, num / den)
    return worst


# -- section models --------------------------------------------------------------

@dataclass(frozen=True)
class SectionModel:
    """Model of the attractor section at one base point.

    segment:        {beta * b_ref : beta in [-1, 1]} (exact in the
                    theorem-backed recurrent regimes)
    order_interval: {z : -b_ref <= z <= b_ref pointwise} (always an outer bound)
    """

    mode: str
    b_ref: np.ndarray

    def __post_init__(self):
        if self.mode not in ("segment", "order_interval"):
            raise ValueError(f"unknown section model mode {self.mode!r}")

    def distance(self, basis, z) -> float:
        zg = basis.to_grid(z)
        bg = basis.to_grid(self.b_ref)
        if self.mode == "order_interval":
            return float(np.max(np.maximum(np.abs(zg) - np.abs(bg), 0.0)))
        return _segment_distance(zg, bg)


def _segment_distance(zg, bg, lo: float = -1.0, hi: float = 1.0) -> float:
    """min over beta in [lo, hi] of sup|z - beta b|; golden section (objective convex)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0

    def f(beta):
        return float(np.max(np.abs(zg - beta * bg)))

    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return min(fc, fd)


# -- forwards attraction -----------------------------------------------------------

def initial_condition_menu(spec: ProblemSpec, bound_r: float, sample_k: int,
                           seed: int = 0) -> np.ndarray:
    """Deterministic batch of initial data with sup-norm bound_r: +-R e0,
    +-R mixed-mode profiles, and R times random positive profiles."""
    basis = spec.basis
    e_unit = principal_unit(spec)
    mixed = basis.e0.copy()
    mixed[1] = 0.6
    mixed = mixed / basis.sup_norm(mixed)
    menu = [e_unit, -e_unit, mixed, -mixed]
    rng = np.random.default_rng(seed)
    while len(menu) < sample_k:
        coeffs = np.abs(rng.normal(size=basis.n_modes)) / (1.0 + np.arange(basis.n_modes)) ** 2
        z = basis.to_coeffs(np.abs(basis.to_grid(coeffs)))
        menu.append(z / basis.sup_norm(z))
    return bound_r * np.stack(menu[:sample_k], axis=1)


def forwards_distance_profile(spec: ProblemSpec, p: BasePoint, bound_r: float,
                              boundary: BoundaryTrajectory, t_grid,
                              mode: str = "segment", sample_k: int = 5,
                              seed: int = 0):
    """Worst distance from u(t, p, B) to the section model at p.t, per grid time.

    B is sampled by sample_k profiles of sup-norm bound_r; returns
    (times, dists) with dists[i] the max over samples of the model distance.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if len(boundary.times) != len(t_grid) or np.max(np.abs(boundary.times - t_grid)) > 1e-9:
        raise ValueError("boundary trajectory must be sampled on t_grid")
    z0 = initial_condition_menu(spec, bound_r, sample_k, seed)
    times, snaps = evolve(spec, p, z0, float(t_grid[-1]), record_times=t_grid)
    dists = np.empty(len(t_grid))
    for j, snap in enumerate(snaps):
        model = SectionModel(mode=mode, b_ref=boundary.states[j])
        dists[j] = max(model.distance(spec.basis, snap[:, k]) for k in range(snap.shape[1]))
    return times, dists


def li_yorke_probe(spec: ProblemSpec, p: BasePoint, lambda1: float, lambda2: float,
                   t_horizon: float, t_grid, b):
    """Track |u(t,p,l2*b) - u(t,p,l1*b)| and report tail min/max.

    Returns (liminf_est, limsup_est, (times, trace)) where the estimates run
    over the tail half of the grid.
    """
    if abs(lambda1) > 1.0 or abs(lambda2) > 1.0:
        raise ValueError("initial scalings must satisfy |lambda| <= 1")
    t_grid = np.asarray(t_grid, dtype=float)
    b = np.asarray(b, dtype=float)
    z0 = np.stack([lambda1 * b, lambda2 * b], axis=1)
    times, snaps = evolve(spec, p, z0, t_horizon, record_times=t_grid)
    trace = np.array([spec.basis.sup_norm(s[:, 1] - s[:, 0]) for s in snaps])
    tail = times >= t_horizon / 2.0
    return float(np.min(trace[tail])), float(np.max(trace[tail])), (times, trace)


def crossing_times(spec: ProblemSpec, p: BasePoint,
                   boundary: BoundaryTrajectory) -> np.ndarray:
    """Times where sup|b(p.t)| crosses the linear-zone threshold r0.

    Sign changes of the margin are located by linear interpolation; touching
    the threshold without crossing does not count.
    """
    margins = boundary.sup_norms(spec.basis) - spec.nonlinearity.r0
    ts = boundary.times
    out = []
    for i in range(len(ts) - 1):
        if margins[i] * margins[i + 1] < 0.0:
            frac = margins[i] / (margins[i] - margins[i + 1])
            out.append(ts[i] + frac * (ts[i + 1] - ts[i]))
    return np.array(out)


# -- sublinear diagnostics ----------------------------------------------------------

def compute_b1(spec: ProblemSpec, p: BasePoint, window=(-2000.0, 0.0),
               grid_step: float = 0.05, m_cut: float = 8.0):
    """Largest principal segment that stays in the linear zone backward:
    (r0 / m) * e(p) with m = max of c(t, p) over the backward window.

    Refuses when the backward log-cocycle exceeds m_cut (evidence that m grows
    without bound as the window deepens).
    """
    t_minus, t_zero = window
    if not (t_minus < 0 and t_zero <= 0):
        raise ValueError("window must be backward, (t_minus, 0]")
    ts = np.arange(t_minus, t_zero + grid_step / 2, grid_step)
    lnc, _ = log_cocycle_grid(spec, p, ts)
    m_log = float(np.max(lnc))
    if m_log > m_cut:
        raise ValueError(
            f"backward log-cocycle reaches {m_log:.3g} > {m_cut}: "
            "unbounded-backward evidence, the principal segment degenerates"
        )
    if spec.homogeneous:
        e = principal_unit(spec)
    else:
        e = estimate_principal(spec, p).e_of_p
    return (spec.nonlinearity.r0 * math.exp(-m_log)) * e


@dataclass
class DecayTrace:
    times: np.ndarray
    values: np.ndarray
    theorem_backed: bool
    notes: str = ""


def sublinear_convergence_test(spec: ProblemSpec, p: BasePoint, z0, t_horizon: float,
                               b, n_points: int = 60,
                               evidence_window=(-2000.0, 2000.0)) -> DecayTrace:
    """Distance |u(t,p,z0) - b(p.t)| with b transported as an equilibrium.

    Theorem-backed only under the sublinear reaction, bounded-backward
    evidence, and forward-growth evidence; otherwise the trace is still
    returned, flagged.
    """
    z0 = np.asarray(z0, dtype=float)
    b = np.asarray(b, dtype=float)
    notes = []
    backed = True
    if spec.nonlinearity.form != "quadratic_excess":
        backed = False
        notes.append("reaction not sublinear")
    ts_b = np.arange(evidence_window[0], 0.0, 0.5)
    ts_f = np.arange(0.0, evidence_window[1] + 0.25, 0.5)
    lnc_b, _ = log_cocycle_grid(spec, p, ts_b)
    lnc_f, _ = log_cocycle_grid(spec, p, ts_f)
    if np.max(lnc_b) > 8.0:
        backed = False
        notes.append("no bounded-backward evidence")
    if np.max(lnc_f) < 8.0:
        backed = False
        notes.append("no forward-growth evidence")
    t_grid = np.linspace(t_horizon / n_points, t_horizon, n_points)
    z_batch = np.stack([z0, b], axis=1)
    times, snaps = evolve(spec, p, z_batch, t_horizon, record_times=t_grid)
    vals = np.array([spec.basis.sup_norm(s[:, 0] - s[:, 1]) for s in snaps])
    return DecayTrace(times=times, values=vals, theorem_backed=backed,
                      notes="; ".join(notes))


# -- cone membership ------------------------------------------------------------------

def cone_membership(basis, z, tol: float) -> str:
    """Interior-grid sign class of a state: strictly positive/negative, zero, mixed.

    For Dirichlet bases the one-sided boundary slope must agree with the sign,
    which the first and last interior grid values witness.
    """
    vals = basis.to_grid(z)
    has_pos = bool(np.any(vals > tol))
    has_neg = bool(np.any(vals < -tol))
    if has_pos and has_neg:
        return MIXED
    if not has_pos and not has_neg:
        return ZERO
    if basis.bc == "dirichlet":
        if has_pos and not (vals[0] > 0.0 and vals[-1] > 0.0):
            return MIXED
        if has_neg and not (vals[0] < 0.0 and vals[-1] < 0.0):
            return MIXED
    return STRICTLY_POSITIVE if has_pos else STRICTLY_NEGATIVE
