"""Joint fitting across hospitals with globally shared parameter dimensions.

Any subset of the three coefficients can be estimated globally: every hospital
takes one gradient step from the current mixed parameter vector, then the
shared dimensions are replaced by their cross-hospital mean before the next
step.  Hospitals whose fit fails (too few reports, or divergence mid-run) are
dropped from subsequent means and flagged rather than aborting the cohort.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .model import Beta
from .optimizer import (FitConfig, _batch_arrays, _resolve_overrides,
                        _result_from_batch, _run_batch)

__all__ = ["SharingSpec", "CohortFit", "fit_shared", "ALL_SHARING_SPECS"]


@dataclass(frozen=True)
class SharingSpec:
    """Which coefficient dimensions (1-based subset of {1, 2, 3}) are global."""

    shared_dims: frozenset = frozenset()

    def __post_init__(self):
        dims = frozenset(self.shared_dims)
        if not dims <= {1, 2, 3}:
            raise UsageError("shared_dims must be a subset of {1, 2, 3}")
        object.__setattr__(self, "shared_dims", dims)

    @property
    def label(self):
        if not self.shared_dims:
            return "individual"
        return "shared:" + ",".join(f"b{d}" for d in sorted(self.shared_dims))

    @classmethod
    def parse(cls, text):
        """Parse CLI-style specs: 'none', 'b1,b3', '1,3', ..."""
        text = text.strip().lower()
        if text in ("", "none", "individual"):
            return cls(frozenset())
        dims = set()
        for part in text.split(","):
            part = part.strip().lstrip("b")
            if part not in ("1", "2", "3"):
                raise UsageError(f"cannot parse shared dimension {part!r}")
            dims.add(int(part))
        return cls(frozenset(dims))


#: All 8 combinations of global vs individual coefficients.
ALL_SHARING_SPECS = tuple(
    SharingSpec(frozenset(bits))
    for bits in [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]
)


@dataclass
class CohortFit:
    """Per-hospital results of a joint fit.

    ``results[k]`` is a FitResult or None when hospital k never entered the
    fit (too few reports).  ``mean_trace`` maps each shared dimension to the
    sequence of global means recorded after every step.  ``history``, when
    requested, holds the full (K, 3) parameter matrix after every step.
    """

    results: list
    excluded: list
    mean_trace: dict = field(default_factory=dict)
    history: list | None = None

    @property
    def betas(self):
        return [r.beta if r is not None else None for r in self.results]

    @property
    def converged(self):
        return [bool(r is not None and r.converged) for r in self.results]


def fit_shared(cohort, spec, config=None, record_history=False):
    """Fit a cohort jointly with the given sharing specification.

    With an empty ``shared_dims`` this reduces bit-exactly to independent
    per-hospital fits under the same config.
    """
    if config is None:
        config = FitConfig()
    if len(cohort) < 1:
        raise UsageError("cohort must contain at least one series")
    usable = [k for k, s in enumerate(cohort) if s.n_reports >= 2]
    excluded = [k for k in range(len(cohort)) if k not in set(usable)]
    results = [None] * len(cohort)
    mean_trace = {d: [] for d in sorted(spec.shared_dims)}
    history = [] if record_history else None
    if usable:
        scaled = [cohort[k].with_scaled_z(config.incidence_scale) for k in usable]
        eta, init = _resolve_overrides([cohort[k] for k in usable], config,
                                       None, None)
        if spec.shared_dims and eta is not None:
            # Stepping a shared dimension with hospital-specific sizes and then
            # averaging is not a descent step on the joint objective; the step
            # size must be common there, so take the most conservative one.
            eta = np.array(np.broadcast_to(np.asarray(eta, dtype=float),
                                           (len(usable), 3)))
            for d in spec.shared_dims:
                eta[:, d - 1] = eta[:, d - 1].min()
        y, r, z = _batch_arrays(scaled)
        shared0 = tuple(d - 1 for d in sorted(spec.shared_dims))
        beta, trace, active, steps_used = _run_batch(
            y, r, z, config, shared_dims=shared0, eta=eta, init=init,
            history=history)
        for i, k in enumerate(usable):
            results[k] = _result_from_batch(beta[i], trace[:, i], steps_used[i])
        if spec.shared_dims:
            # Under a sharing constraint one hospital's own loss may rise while
            # the joint objective falls, so convergence is judged on the mean
            # loss over the hospitals that stayed finite.
            finite = [k for k in usable
                      if all(np.isfinite(results[k].loss_trace))
                      and np.isfinite(results[k].beta.as_array()).all()]
            if finite:
                first = float(np.mean([results[k].loss_trace[0]
                                       for k in finite]))
                last = float(np.mean([results[k].loss_trace[-1]
                                      for k in finite]))
                joint_ok = last <= first
                for k in finite:
                    results[k].converged = joint_ok
                    results[k].fell_back = not joint_ok
        if history is not None:
            for d in sorted(spec.shared_dims):
                mean_trace[d] = [float(np.nanmean(h[:, d - 1])) for h in history]
        elif spec.shared_dims:
            # Without history only the final mean is known per dimension.
            for d in sorted(spec.shared_dims):
                col = beta[np.isfinite(beta).all(axis=1), d - 1]
                mean_trace[d] = [float(col.mean())] if len(col) else []
    full_history = None
    if history is not None:
        full_history = []
        for h in history:
            mat = np.full((len(cohort), 3), np.nan)
            for i, k in enumerate(usable):
                mat[k] = h[i]
            full_history.append(mat)
    return CohortFit(results=results, excluded=excluded,
                     mean_trace=mean_trace, history=full_history)
