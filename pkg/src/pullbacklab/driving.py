"""Forcing signals with exact closed-form primitives, and the base orbit they drive.

A driver is a scalar signal a(t) together with its primitive I(t) = int_0^t a,
available in closed form.  The base flow is realized as time translation along
one driver orbit: a base point is just an offset s, and p.t maps to s+t.  All
cocycle logs along an orbit reduce to primitive differences I(s+t) - I(s), so
they are exact to roundoff no matter how long the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DRIVER_KINDS = ("trig_poly", "geometric_limit_periodic", "synthetic_window")
WINDOW_FORMS = ("power", "dip_return")


@dataclass(frozen=True)
class BasePoint:
    """Position along the driver orbit, encoded as a time offset."""

    offset: float = 0.0

    def translate(self, t: float) -> "BasePoint":
        return BasePoint(self.offset + t)


def base_translate(p: BasePoint, t: float) -> BasePoint:
    return p.translate(t)


@dataclass(frozen=True)
class Driver:
    """Forcing signal a(t) with exact primitive I(t).

    kind:
        trig_poly                sum of A*sin(w*t + phi) terms; w = 0 encodes the
                                 constant A*sin(phi) (used for nonzero-mean controls)
        geometric_limit_periodic truncation of the limit-periodic family
                                 a(t) = -sum_k 2^-k sin(4^-k t); I <= 0, I(0) = 0,
                                 with recurrent dips of depth ~2^(m+1)
        synthetic_window         non-almost-periodic profiles that realize one
                                 asymptotic class exactly on the computational
                                 window (see window_form)

    window_form "power":      I(t) = sign_neg*|t|^beta for t<0, sign_pos*t^beta for
                              t>=0 (0<beta<1; kink at 0, a(0) := 0 by convention)
    window_form "dip_return": I(t) = -depth*sin^2(pi*t/period); bounded, I <= 0,
                              returns to 0 every period with dips of depth `depth`
                              (window proxy for the recurrent bounded-backward class)

    class_hint is documentation only and never consumed by algorithms.
    """

    kind: str
    terms: tuple[tuple[float, float, float], ...] = ()
    window_form: str | None = None
    params: dict = field(default_factory=dict)
    class_hint: str | None = None

    def __post_init__(self):
        if self.kind not in DRIVER_KINDS:
            raise ValueError(f"unknown driver kind {self.kind!r}")
        if self.kind == "synthetic_window":
            if self.window_form not in WINDOW_FORMS:
                raise ValueError(f"unknown window_form {self.window_form!r}")
            if self.window_form == "power":
                beta = self.params.get("beta")
                if beta is None or not 0.0 < beta < 1.0:
                    raise ValueError("power window requires 0 < beta < 1")
                for key in ("sign_neg", "sign_pos"):
                    if self.params.get(key) not in (-1.0, 1.0, -1, 1):
                        raise ValueError(f"power window requires {key} in {{-1, +1}}")
            else:
                if self.params.get("depth", 0.0) <= 0.0:
                    raise ValueError("dip_return window requires depth > 0")
                if self.params.get("period", 0.0) <= 0.0:
                    raise ValueError("dip_return window requires period > 0")
        else:
            if not self.terms:
                raise ValueError(f"{self.kind} driver requires at least one term")
            object.__setattr__(
                self, "terms", tuple((float(a), float(w), float(ph)) for a, w, ph in self.terms)
            )

    # -- constructors -------------------------------------------------------

    @classmethod
    def trig(cls, terms, class_hint=None) -> "Driver":
        return cls(kind="trig_poly", terms=tuple(terms), class_hint=class_hint)

    @classmethod
    def geometric(cls, n_terms: int = 6, class_hint=None) -> "Driver":
        """Truncated limit-periodic family: amplitudes 2^-k, frequencies 4^-k."""
        terms = tuple((-(2.0**-k), 4.0**-k, 0.0) for k in range(1, n_terms + 1))
        return cls(kind="geometric_limit_periodic", terms=terms, class_hint=class_hint)

    @classmethod
    def power_window(cls, beta, sign_neg, sign_pos, class_hint=None) -> "Driver":
        params = {"beta": float(beta), "sign_neg": float(sign_neg), "sign_pos": float(sign_pos)}
        return cls(kind="synthetic_window", window_form="power", params=params,
                   class_hint=class_hint)

    @classmethod
    def dip_return(cls, depth, period, class_hint=None) -> "Driver":
        params = {"depth": float(depth), "period": float(period)}
        return cls(kind="synthetic_window", window_form="dip_return", params=params,
                   class_hint=class_hint)

    # -- evaluation ---------------------------------------------------------

    def eval(self, t: float) -> float:
        return float(self.eval_array(np.asarray([t]))[0])

    def eval_array(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind in ("trig_poly", "geometric_limit_periodic"):
            out = np.zeros_like(ts)
            for amp, w, phase in self.terms:
                out += amp * np.sin(w * ts + phase)
            return out
        if self.window_form == "power":
            beta = self.params["beta"]
            sn, sp = self.params["sign_neg"], self.params["sign_pos"]
            out = np.zeros_like(ts)
            pos = ts > 0
            neg = ts < 0
            # one-sided derivatives of |t|^beta; a(0) = 0 by symmetry convention
            out[pos] = sp * beta * ts[pos] ** (beta - 1.0)
            out[neg] = -sn * beta * (-ts[neg]) ** (beta - 1.0)
            return out
        depth, period = self.params["depth"], self.params["period"]
        return -depth * (math.pi / period) * np.sin(2.0 * math.pi * ts / period)

    def primitive(self, t: float) -> float:
        return float(self.primitive_array(np.asarray([t]))[0])

    def primitive_array(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind in ("trig_poly", "geometric_limit_periodic"):
            out = np.zeros_like(ts)
            for amp, w, phase in self.terms:
                if w == 0.0:
                    out += amp * math.sin(phase) * ts
                else:
                    out += (amp / w) * (math.cos(phase) - np.cos(w * ts + phase))
            return out
        if self.window_form == "power":
            beta = self.params["beta"]
            sn, sp = self.params["sign_neg"], self.params["sign_pos"]
            return np.where(ts >= 0.0, sp * np.abs(ts) ** beta, sn * np.abs(ts) ** beta)
        depth, period = self.params["depth"], self.params["period"]
        return -depth * np.sin(math.pi * ts / period) ** 2

    def log_cocycle(self, p: BasePoint, ts) -> np.ndarray:
        """ln c(t, p) along the orbit: I(s+t) - I(s), exact."""
        ts = np.asarray(ts, dtype=float)
        return self.primitive_array(p.offset + ts) - self.primitive(p.offset)

    def has_zero_mean(self) -> bool:
        if self.kind in ("trig_poly", "geometric_limit_periodic"):
            return all(w != 0.0 or amp * math.sin(phase) == 0.0
                       for amp, w, phase in self.terms)
        return False

    def sup_abs(self, t_lo: float, t_hi: float, step: float = 0.01) -> float:
        """Growth-rate bound over a window (used for absorbing-set estimates).

        Bounded forms are sampled on a grid.  Power windows have an integrable
        singularity of a at the kink, so the pointwise sup does not exist; the
        unit-interval growth bound sup |I(t+1) - I(t)| = 1 stands in for it.
        """
        if self.kind == "synthetic_window" and self.window_form == "power":
            return 1.0
        ts = np.arange(t_lo, t_hi + step, step)
        return float(np.max(np.abs(self.eval_array(ts))))

    # -- serialization ------------------------------------------------------

    def to_config(self) -> dict:
        return {
            "kind": self.kind,
            "terms": [list(term) for term in self.terms],
            "window_form": self.window_form,
            "params": dict(self.params),
            "class_hint": self.class_hint,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Driver":
        known = {"kind", "terms", "window_form", "params", "class_hint"}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown driver config keys: {sorted(unknown)}")
        return cls(
            kind=cfg["kind"],
            terms=tuple(tuple(t) for t in cfg.get("terms") or ()),
            window_form=cfg.get("window_form"),
            params=dict(cfg.get("params") or {}),
            class_hint=cfg.get("class_hint"),
        )


def driver_eval(d: Driver, t: float) -> float:
    return d.eval(t)


def driver_primitive(d: Driver, t: float) -> float:
    return d.primitive(t)


@dataclass(frozen=True)
class WindowStats:
    """Finite-horizon statistics of ln c(t, p) over [T_minus, T_plus]."""

    max_lnc_backward: float
    max_lnc_forward: float
    min_lnc_forward: float
    return_count_backward: int
    return_count_forward: int
    return_depth_backward: float
    return_depth_forward: float
    t_minus: float
    t_plus: float
    grid_step: float
    eps_rec: float
    t_rec: float


def _return_clusters(ts, lnc, eps_rec):
    """Count connected grid clusters where |ln c| <= eps_rec; depth = closest approach."""
    near = np.abs(lnc) <= eps_rec
    if not near.any():
        return 0, math.inf
    starts = int(np.sum(near[1:] & ~near[:-1])) + int(near[0])
    return starts, float(np.min(np.abs(lnc[near])))


def window_stats(d: Driver, p: BasePoint, t_minus: float, t_plus: float,
                 grid_step: float, eps_rec: float = 0.5,
                 t_rec: float | None = None) -> WindowStats:
    """Grid statistics of ln c(t, p) = I(s+t) - I(s) over a two-sided window.

    Returns the backward max (boundedness evidence), the forward max/min, and a
    recurrence proxy: clusters of times with |ln c| <= eps_rec at |t| >= t_rec
    (default half the window on each side).
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    if not t_minus < 0 < t_plus:
        raise ValueError("window must satisfy t_minus < 0 < t_plus")
    ts_back = np.arange(t_minus, 0.0 + grid_step / 2, grid_step)
    ts_fwd = np.arange(0.0, t_plus + grid_step / 2, grid_step)
    lnc_back = d.log_cocycle(p, ts_back)
    lnc_fwd = d.log_cocycle(p, ts_fwd)
    if t_rec is None:
        t_rec = min(-t_minus, t_plus) / 2.0
    far_b = ts_back <= -t_rec
    far_f = ts_fwd >= t_rec
    count_b, depth_b = _return_clusters(ts_back[far_b], lnc_back[far_b], eps_rec)
    count_f, depth_f = _return_clusters(ts_fwd[far_f], lnc_fwd[far_f], eps_rec)
    return WindowStats(
        max_lnc_backward=float(np.max(lnc_back)),
        max_lnc_forward=float(np.max(lnc_fwd)),
        min_lnc_forward=float(np.min(lnc_fwd)),
        return_count_backward=count_b,
        return_count_forward=count_f,
        return_depth_backward=depth_b,
        return_depth_forward=depth_f,
        t_minus=t_minus, t_plus=t_plus, grid_step=grid_step,
        eps_rec=eps_rec, t_rec=t_rec,
    )
