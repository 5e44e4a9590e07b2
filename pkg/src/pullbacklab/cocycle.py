"""Principal-direction cocycle, Lyapunov estimates, and point classification.

The linearized semiflow admits a splitting into the principal direction e(p)
and an exponentially dominated complement.  Along the principal direction the
dynamics is the scalar cocycle c(t, p); in the homogeneous case ln c is exactly
the driver primitive difference I(s+t) - I(s), and in the perturbed case it is
recovered from sup-norms of the propagated principal vector (any fixed norm
gives the same cocycle up to a bounded cohomology factor, which the
classification thresholds absorb).

Classification is explicitly finite-horizon: every flag carries the window
statistic that witnessed it, and the report is evidence, never a theorem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .driving import BasePoint
from .dynamics import ProblemSpec, linear_propagate

DEFAULT_T_PULL = 30.0
SEPARATION_TOL = 1e-6


@dataclass(frozen=True)
class SeparationEstimate:
    """Principal direction at p from pullback power iteration.

    e_of_p has unit grid sup-norm and is interior-positive; residual is the
    sup-distance to the estimate at twice the pullback depth.
    """

    e_of_p: np.ndarray
    pullback_depth: float
    residual: float

    @property
    def converged(self) -> bool:
        return self.residual < SEPARATION_TOL


def principal_unit(spec: ProblemSpec) -> np.ndarray:
    """Sup-normalized principal basis vector (exact e(p) in homogeneous mode)."""
    e0 = spec.basis.e0
    return e0 / spec.basis.sup_norm(e0)


def _pullback_direction(spec, p, depth):
    v = linear_propagate(spec, p.translate(-depth), principal_unit(spec), depth)
    nrm = spec.basis.sup_norm(v)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ArithmeticError("principal pullback iteration degenerated")
    v = v / nrm
    grid = spec.basis.to_grid(v)
    if np.sum(grid) < 0:
        v = -v
    return v


def estimate_principal(spec: ProblemSpec, p: BasePoint,
                       t_pull: float = DEFAULT_T_PULL) -> SeparationEstimate:
    """normalize(phi(t_pull, p.(-t_pull)) e0), with a depth-doubling residual.

    In homogeneous mode the modes decouple and the estimate is the principal
    basis vector exactly, residual 0.
    """
    if t_pull <= 0:
        raise ValueError("t_pull must be positive")
    e1 = _pullback_direction(spec, p, t_pull)
    e2 = _pullback_direction(spec, p, 2.0 * t_pull)
    residual = float(np.max(np.abs(spec.basis.to_grid(e1 - e2))))
    return SeparationEstimate(e_of_p=e1, pullback_depth=t_pull, residual=residual)


# -- cocycle log --------------------------------------------------------------

def log_cocycle_grid(spec: ProblemSpec, p: BasePoint, ts,
                     t_pull: float = DEFAULT_T_PULL):
    """ln c(t, p) on a time grid; returns (values, reliable).

    Homogeneous mode is closed form (reliable always).  Perturbed mode
    propagates the estimated principal vector with per-chunk renormalization
    and is flagged unreliable if the separation estimates did not converge.
    """
    ts = np.asarray(ts, dtype=float)
    if spec.homogeneous:
        return spec.driver.log_cocycle(p, ts), True
    return _perturbed_log_grid(spec, p, ts, t_pull)


def cocycle_log(spec: ProblemSpec, p: BasePoint, t: float) -> float:
    vals, _ = log_cocycle_grid(spec, p, np.asarray([t]))
    return float(vals[0])


def cocycle_log_info(spec: ProblemSpec, p: BasePoint, t: float,
                     t_pull: float = DEFAULT_T_PULL):
    """ln c(t, p) together with the perturbed-mode reliability flag."""
    vals, reliable = log_cocycle_grid(spec, p, np.asarray([t]), t_pull)
    return float(vals[0]), reliable


def _walk_log(spec, start: BasePoint, v, t_span, record_offsets, chunk=5.0):
    """Propagate v over [0, t_span] from start, tracking ln of its sup-norm.

    Records the accumulated log at the requested offsets; renormalizes after
    each chunk so long horizons neither overflow nor underflow.
    """
    record_offsets = np.asarray(record_offsets, dtype=float)
    out = np.empty(record_offsets.shape)
    log_acc, t_cur = 0.0, 0.0
    order = np.argsort(record_offsets)
    for idx in order:
        target = record_offsets[idx]
        while t_cur < target - 1e-12:
            step = min(chunk, target - t_cur)
            v = linear_propagate(spec, start.translate(t_cur), v, step)
            nrm = spec.basis.sup_norm(v)
            log_acc += math.log(nrm)
            v = v / nrm
            t_cur += step
        out[idx] = log_acc
    return out


def _perturbed_log_grid(spec, p, ts, t_pull):
    reliable = True
    out = np.zeros_like(ts)
    neg = ts < 0
    if np.any(~neg):
        sep = estimate_principal(spec, p, t_pull)
        reliable = reliable and sep.converged
        fwd = ts[~neg]
        out[~neg] = _walk_log(spec, p, sep.e_of_p, float(np.max(fwd, initial=0.0)), fwd)
    if np.any(neg):
        t_min = float(np.min(ts))
        base = p.translate(t_min)
        sep = estimate_principal(spec, base, t_pull)
        reliable = reliable and sep.converged
        # walk once from the earliest time; cocycle additivity gives
        # ln c(t, p) = L(t - t_min) - L(-t_min) along the same vector
        offs = np.concatenate([ts[neg] - t_min, [-t_min]])
        logs = _walk_log(spec, base, sep.e_of_p, -t_min, offs)
        out[neg] = logs[:-1] - logs[-1]
    return out, reliable


def lyapunov_estimate(spec: ProblemSpec, p: BasePoint, t_horizon: float) -> float:
    """Finite-horizon exponent ln c(T, p) / T."""
    if t_horizon <= 0:
        raise ValueError("t_horizon must be positive")
    return cocycle_log(spec, p, t_horizon) / t_horizon


# -- classification -----------------------------------------------------------

@dataclass(frozen=True)
class ClassifyThresholds:
    m_cut: float = 8.0        # ln-scale bound for "cocycle stayed bounded"
    eps_zero: float = 1e-3    # c below this counts as "converged to zero"
    eps_rec: float = 0.5      # |ln c| within this of 0 counts as a return


@dataclass(frozen=True)
class ClassReport:
    """Finite-horizon classification evidence for one base point.

    Flags are window statements, not asymptotic theorems; each carries its
    witnessing statistic in stats.  f_candidate and s_candidate are mutually
    exclusive by construction, and a_minus is only granted together with
    f_candidate (a backward-vanishing cocycle is bounded backward).
    """

    offset: float
    f_candidate: bool
    s_candidate: bool
    a_plus: bool
    a_minus: bool
    oscillating: bool
    recurrent_plus: bool
    recurrent_minus: bool
    reliable: bool
    window: tuple
    thresholds: ClassifyThresholds
    stats: dict = field(default_factory=dict)

    def flag_row(self) -> dict:
        row = {"offset": self.offset}
        for name in ("f_candidate", "s_candidate", "a_plus", "a_minus",
                     "oscillating", "recurrent_plus", "recurrent_minus", "reliable"):
            row[name] = getattr(self, name)
        row.update({k: v for k, v in sorted(self.stats.items())})
        return row


def classify_point(spec: ProblemSpec, p: BasePoint, window=(-2000.0, 2000.0),
                   thresholds: ClassifyThresholds | None = None,
                   grid_step: float = 0.5,
                   t_pull: float = DEFAULT_T_PULL) -> ClassReport:
    """Window classification of p from the behaviour of ln c(t, p)."""
    th = thresholds or ClassifyThresholds()
    t_minus, t_plus = window
    if not t_minus < 0 < t_plus:
        raise ValueError("window must satisfy t_minus < 0 < t_plus")
    ts_back = np.arange(t_minus, grid_step / 2, grid_step)
    ts_fwd = np.arange(0.0, t_plus + grid_step / 2, grid_step)
    lnc_back, rel_b = log_cocycle_grid(spec, p, ts_back, t_pull)
    lnc_fwd, rel_f = log_cocycle_grid(spec, p, ts_fwd, t_pull)

    max_back = float(np.max(lnc_back))
    f_candidate = max_back <= th.m_cut

    q_fwd = ts_fwd >= 0.75 * t_plus           # last quarter of the forward window
    q_back = ts_back <= 0.75 * t_minus        # earliest quarter of the backward window
    log_eps = math.log(th.eps_zero)
    a_plus = bool(np.all(lnc_fwd[q_fwd] <= log_eps))
    a_minus_evidence = bool(np.all(lnc_back[q_back] <= log_eps))
    a_minus = a_minus_evidence and f_candidate

    tail_f = ts_fwd >= 0.5 * t_plus
    tail_b = ts_back <= 0.5 * t_minus
    rec_plus = bool(np.any(np.abs(lnc_fwd[tail_f]) <= th.eps_rec))
    rec_minus = bool(np.any(np.abs(lnc_back[tail_b]) <= th.eps_rec))
    oscillating = bool(
        np.min(lnc_fwd[tail_f]) <= -th.m_cut and np.max(lnc_fwd[tail_f]) >= th.m_cut
        and np.min(lnc_back[tail_b]) <= -th.m_cut and np.max(lnc_back[tail_b]) >= th.m_cut
    )

    stats = {
        "max_lnc_backward": max_back,
        "max_lnc_forward": float(np.max(lnc_fwd)),
        "min_lnc_forward": float(np.min(lnc_fwd)),
        "min_lnc_backward": float(np.min(lnc_back)),
        "lnc_fwd_last_quarter_max": float(np.max(lnc_fwd[q_fwd])),
        "lnc_back_first_quarter_max": float(np.max(lnc_back[q_back])),
        "closest_return_forward": float(np.min(np.abs(lnc_fwd[tail_f]))),
        "closest_return_backward": float(np.min(np.abs(lnc_back[tail_b]))),
        "a_minus_evidence": a_minus_evidence,
    }
    return ClassReport(
        offset=p.offset, f_candidate=f_candidate, s_candidate=not f_candidate,
        a_plus=a_plus, a_minus=a_minus, oscillating=oscillating,
        recurrent_plus=rec_plus, recurrent_minus=rec_minus,
        reliable=bool(rel_b and rel_f), window=(t_minus, t_plus),
        thresholds=th, stats=stats,
    )


# -- separation of the complement ---------------------------------------------

@dataclass(frozen=True)
class GapReport:
    fitted_rate: float        # decay rate of |phi z2| / |phi e|
    fitted_offset: float      # exp(intercept) of the fit, the M of the bound
    expected_gap: float
    times: np.ndarray
    log_ratio: np.ndarray


def separation_gap_check(spec: ProblemSpec, p: BasePoint, z2, t_horizon: float,
                         n_samples: int = 24,
                         t_pull: float = DEFAULT_T_PULL) -> GapReport:
    """Fit the exponential domination rate of a complement vector.

    z2 must have zero principal-mode coefficient; the ratio
    |phi(t,p) z2| / |phi(t,p) e(p)| is fitted as M * exp(-rate * t) and the
    rate is compared against the basis spectral gap by the caller.
    """
    z2 = np.asarray(z2, dtype=float)
    if abs(z2[0]) > 1e-10 * max(np.max(np.abs(z2)), 1e-300):
        raise ValueError("z2 must have zero principal-mode coefficient")
    ts = np.linspace(t_horizon / n_samples, t_horizon, n_samples)
    if spec.homogeneous:
        e = principal_unit(spec)
        _, top = linear_propagate(spec, p, e, t_horizon, record_times=ts)
        _, bot = linear_propagate(spec, p, z2, t_horizon, record_times=ts)
        log_ratio = np.array([
            math.log(spec.basis.sup_norm(b)) - math.log(spec.basis.sup_norm(t_))
            for b, t_ in zip(bot, top)
        ])
    else:
        sep = estimate_principal(spec, p, t_pull)
        log_top = _walk_log(spec, p, sep.e_of_p, t_horizon, ts)
        nrm = spec.basis.sup_norm(z2)
        log_bot = _walk_log(spec, p, z2 / nrm, t_horizon, ts)
        log_ratio = log_bot - log_top
    slope, intercept = np.polyfit(ts, log_ratio, 1)
    return GapReport(fitted_rate=-float(slope), fitted_offset=float(math.exp(intercept)),
                     expected_gap=spec.basis.gap, times=ts, log_ratio=log_ratio)
