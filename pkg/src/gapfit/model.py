"""Gap-bridging increment regression model.

One hospital's prevalent-case series is modeled through its day-to-day
increments: the predicted increment for day t+1 is

    dy_hat[t+1] = b1 + b2 * y_tilde[t] + b3 * z[t]

where ``y_tilde`` is the reported value whenever a report exists and otherwise
the previous state plus the model's own predicted increment.  Missing reports
are thereby bridged by carrying the model forward instead of imputing, and the
loss scores only days with an actual report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError

__all__ = ["HospitalSeries", "Beta", "Trajectory", "loss", "predict_trajectory",
           "expand_gap", "predict_last_increment"]


@dataclass(frozen=True)
class Beta:
    """The three regression coefficients.

    b1: intercept (cases/day), b2: per prevalent case per day, b3: per incident
    case per day.
    """

    b1: float = 0.0
    b2: float = 0.0
    b3: float = 0.0

    def as_array(self):
        return np.array([self.b1, self.b2, self.b3], dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]))


class HospitalSeries:
    """One hospital's reports over T days.

    ``y`` holds the prevalent ICU cases with NaN for days without a report,
    ``z`` the (complete) daily incidence covariate, and ``r`` is derived as
    r[t] = 1 iff y[t] is present.
    """

    __slots__ = ("id", "y", "z", "r")

    def __init__(self, id, y, z):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if y.ndim != 1 or z.ndim != 1 or len(y) != len(z):
            raise ValueError("y and z must be 1-d sequences of equal length")
        if len(y) < 2:
            raise ValueError("a series needs at least 2 days")
        if not np.all(np.isfinite(z)):
            raise ValueError("incidence covariate must be complete and finite")
        if np.any(z < 0):
            raise ValueError("incidence must be nonnegative")
        observed = np.isfinite(y)
        if np.any(y[observed] < 0):
            raise ValueError("reported case counts must be nonnegative")
        if not observed.any():
            raise ValueError("a series needs at least one report")
        self.id = str(id)
        self.y = y
        self.z = z
        self.r = observed

    @property
    def T(self):
        return len(self.y)

    @property
    def n_reports(self):
        return int(self.r.sum())

    def truncated(self, stop):
        """Copy restricted to days 1..stop (1-based, inclusive)."""
        return HospitalSeries(self.id, self.y[:stop].copy(), self.z[:stop].copy())

    def window(self, start, stop):
        """Copy restricted to days start..stop (1-based, inclusive)."""
        return HospitalSeries(self.id, self.y[start - 1:stop].copy(),
                              self.z[start - 1:stop].copy())

    def with_scaled_z(self, scale):
        if scale == 1.0:
            return self
        return HospitalSeries(self.id, self.y, self.z * scale)


@dataclass
class Trajectory:
    """Bridged state and predicted increments, day by day.

    Entries are None before the first report; afterwards ``y_tilde[t]`` equals
    the report when present and the carried-forward prediction otherwise, and
    ``dy_hat[t]`` is the model's predicted increment into day t.
    """

    y_tilde: list = field(default_factory=list)
    dy_hat: list = field(default_factory=list)


def _coefs(beta):
    if isinstance(beta, Beta):
        return beta.b1, beta.b2, beta.b3
    b1, b2, b3 = beta
    return b1, b2, b3


def loss(series, beta):
    """Masked mean squared error of predicted increments.

    Leading missing days are skipped; from the first report onward the model
    predicts each day's increment, scores the squared residual on reported
    days, and carries its own prediction forward on missing days.  Returns the
    summed squared error divided by the number of scored residuals.

    ``beta`` may hold plain floats or DiffScalars, so the same code serves as
    the differentiated loss.
    """
    b1, b2, b3 = _coefs(beta)
    # Plain-float views keep numpy scalar types out of DiffScalar arithmetic.
    y, z, r = series.y.tolist(), series.z.tolist(), series.r
    sqerror = 0.0
    contribno = 0
    firstseen = False
    last_y = 0.0
    for t in range(len(y)):
        if not firstseen:
            if r[t]:
                firstseen = True
                last_y = y[t]
            continue
        pred_dy = b1 + b2 * last_y + b3 * z[t - 1]
        if r[t]:
            dy = y[t] - last_y
            diff = pred_dy - dy
            sqerror = sqerror + diff * diff
            contribno += 1
            last_y = y[t]
        else:
            last_y = last_y + pred_dy
    if contribno == 0:
        raise InsufficientDataError(
            f"series {series.id!r} has fewer than 2 reports")
    return sqerror / contribno


def predict_trajectory(series, beta):
    """Full bridged trajectory under ``beta``.

    Bridges every internal gap by the carry-forward recursion; entries before
    the first report are None.
    """
    b1, b2, b3 = _coefs(beta)
    y, z, r = series.y.tolist(), series.z.tolist(), series.r
    y_tilde = [None] * len(y)
    dy_hat = [None] * len(y)
    firstseen = False
    last_y = 0.0
    for t in range(len(y)):
        if not firstseen:
            if r[t]:
                firstseen = True
                last_y = y[t]
                y_tilde[t] = float(y[t])
            continue
        pred_dy = b1 + b2 * last_y + b3 * z[t - 1]
        dy_hat[t] = float(pred_dy)
        last_y = y[t] if r[t] else last_y + pred_dy
        y_tilde[t] = float(last_y)
    return Trajectory(y_tilde=y_tilde, dy_hat=dy_hat)


def expand_gap(y_anchor, z_window, beta, gap_len):
    """Predicted increment after ``gap_len`` carried steps, in closed form.

    Explicit polynomial expansion of the carry-forward recursion: starting from
    state ``y_anchor``, after g missing days the state is

        a*(1+b2)^g + sum_j (1+b2)^(g-1-j) * (b1 + b3*z[j])

    and the returned value is the next predicted increment from that state.
    ``z_window`` must supply the gap_len+1 covariate values consumed along the
    way.  Agrees exactly with the recursion in :func:`predict_trajectory`.
    """
    if gap_len < 0:
        raise ValueError("gap_len must be >= 0")
    if len(z_window) != gap_len + 1:
        raise ValueError("z_window must have gap_len + 1 entries")
    b1, b2, b3 = _coefs(beta)
    growth = 1.0 + b2
    state = y_anchor * growth ** gap_len
    for j in range(gap_len):
        state += growth ** (gap_len - 1 - j) * (b1 + b3 * z_window[j])
    return b1 + b2 * state + b3 * z_window[gap_len]


def predict_last_increment(series, beta):
    """Model prediction for the increment into the final day.

    Evaluates the bridged trajectory on days 1..T-1 and returns the predicted
    increment dy_hat for day T; independent of whether day T was reported.
    """
    head = series.truncated(series.T - 1)
    if head.n_reports < 2:
        raise InsufficientDataError(
            f"series {series.id!r} needs >= 2 reports before the last day")
    b1, b2, b3 = _coefs(beta)
    traj = predict_trajectory(head, beta)
    y_prev = traj.y_tilde[-1]
    return b1 + b2 * y_prev + b3 * series.z[series.T - 2]
