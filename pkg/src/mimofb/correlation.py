"""Two-time correlations of the recorded currents.

For lags ``tau > 0`` the stationary current correlation has a smooth part
given by the quantum regression rule,

    <y_r(t) y_s(t+tau)> = (1/hbar^2) Tr[ X_s e^{G tau} (alpha_r rho + rho alpha_r^dag) ] ,

with ``X_s = g_s + g_s^dag`` the current observables.  On top of this sits a
white-noise term ``hbar^2 I_R delta(tau)`` whose weight is reported
separately and never discretized.  In closed loop ``G`` is the full
generator and ``alpha_r = g_r - i hbar f_r``; without feedback ``G`` is the
measurement-only generator and ``alpha_r = g_r``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import numkit
from .errors import NegativeLagError, NoSteadyStateError
from .liouvillian import (
    Superoperator,
    full_liouvillian,
    measurement_liouvillian,
    require_density_matrix,
)
from .model import SystemModel, current_observables, measured_channel_ops
from .sme import innovation_ops


@dataclass(frozen=True)
class CorrelationResult:
    """Smooth correlation values per lag, plus the separate delta-term weight.

    ``values[k, r, s]`` approximates ``<y_r(t) y_s(t + taus[k])>`` (earlier
    time on the first index).  ``delta_weight`` is the coefficient of
    ``delta(tau)``, always ``hbar^2 I_R``.  ``imag_residual`` records the
    largest imaginary part discarded when taking the real values and should
    sit at roundoff level for Hermitian input states.
    """

    taus: np.ndarray
    values: np.ndarray
    delta_weight: np.ndarray
    imag_residual: float


def _correlate(model: SystemModel, generator: Superoperator, alphas, rho, taus):
    rho = require_density_matrix(rho, dim=model.dim)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size and taus.min() < 0.0:
        raise NegativeLagError(f"lags must be non-negative, got {taus.min()}")
    n_r = model.n_currents
    hbar = model.hbar
    xs = current_observables(model)
    xvecs = np.conj(xs.transpose(0, 2, 1).reshape(n_r, model.dim**2))
    seeds = np.array(
        [numkit.vectorize(a @ rho + rho @ a.conj().T) for a in alphas]
    ).reshape(n_r, model.dim**2)
    values = np.empty((taus.size, n_r, n_r))
    imag_residual = 0.0
    for k, tau in enumerate(taus):
        prop = scipy.linalg.expm(generator.matrix * tau)
        evolved = seeds @ prop.T           # row r: e^{G tau} applied to seed r
        raw = (evolved @ xvecs.T) / hbar**2  # [r, s] = Tr[X_s ...] / hbar^2
        imag_residual = max(imag_residual, numkit.max_abs(raw.imag))
        values[k] = raw.real
    delta_weight = hbar**2 * np.eye(n_r)
    return CorrelationResult(
        taus=taus, values=values, delta_weight=delta_weight,
        imag_residual=imag_residual,
    )


def current_correlation(model: SystemModel, rho, taus) -> CorrelationResult:
    """Closed-loop current correlations from the state ``rho`` (usually steady)."""
    return _correlate(model, full_liouvillian(model), innovation_ops(model), rho, taus)


def current_correlation_measurement_only(model: SystemModel, rho, taus) -> CorrelationResult:
    """Current correlations with the feedback loop open; ``model.feedback`` is ignored."""
    return _correlate(
        model, measurement_liouvillian(model), measured_channel_ops(model), rho, taus
    )


def steady_state(generator: Superoperator, tol: float = 1e-10) -> np.ndarray:
    """Unique trace-one fixed point of a generator.

    Finds the null space by SVD; raises NoSteadyStateError when it is not
    one-dimensional (within ``tol`` relative to the largest singular value)
    or carries no trace to normalize.
    """
    _, svals, vh = np.linalg.svd(generator.matrix)
    cutoff = tol * max(1.0, float(svals[0])) if svals.size else tol
    null_dim = int(np.sum(svals < cutoff)) if svals.size else generator.dim**2
    if null_dim != 1:
        raise NoSteadyStateError(
            f"generator null space is {null_dim}-dimensional (need exactly 1)"
        )
    rho = numkit.devectorize(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    tr = rho.trace().real
    if abs(tr) < np.sqrt(tol):
        raise NoSteadyStateError("null vector is traceless; cannot normalize")
    return rho / tr


def empirical_current_correlation(records, lag_steps: int, start: int = 0):
    """Monte Carlo estimate of ``<y_r(t) y_s(t + lag)>`` from recorded currents.

    Each trajectory contributes the time average of lagged current products
    over its record (from step ``start`` on); the function returns the mean
    and the standard error across trajectories, both (R, R).  Valid for
    stationary records, e.g. trajectories started in the steady state.
    """
    if lag_steps < 1:
        raise NegativeLagError("lag_steps must be >= 1 (the delta term lives at lag 0)")
    per_traj = []
    for rec in records:
        y = rec.currents[start:]
        n = y.shape[0] - lag_steps
        if n < 1:
            raise ValueError("records too short for the requested lag")
        prods = y[:n, :, None] * y[lag_steps:, None, :]
        per_traj.append(prods.mean(axis=0))
    stack = np.array(per_traj)
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / np.sqrt(len(per_traj))
    return mean, se
