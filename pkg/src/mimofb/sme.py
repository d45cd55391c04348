"""Stochastic integration of the conditioned feedback dynamics.

Euler-Maruyama steps of

    d rho = G rho dt + (1/hbar) H[sum_r dw_r alpha_r] rho

with ``G`` the closed-loop generator, ``alpha_r = g_r - i hbar f_r`` the
innovation operators and ``H[A] rho = A rho + rho A^dag - Tr[...] rho`` the
normalized conditioning map.  Each step also produces the current increment

    hbar * y dt = <g_r + g_r^dag> dt + hbar * dw_r .

:func:`sme_step` is the single-state reference update; :func:`run_trajectories`
evolves many trajectories at once on vectorized states (identical dynamics,
batched matrix products) and is the one to use for ensembles.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numkit
from .errors import (
    DimensionMismatchError,
    GridMismatchError,
    StateDivergedError,
)
from .liouvillian import full_liouvillian, require_density_matrix
from .model import SystemModel, current_observables, measured_channel_ops

_CHUNK = 1024  # trajectories simulated per batch (fixed so results never depend on scheduling)

# Trace window outside which a trajectory counts as numerically lost.
_TRACE_MIN, _TRACE_MAX = 0.1, 10.0
# Most negative eigenvalue the PSD projection will still repair.
_EIG_ABORT = -0.1


@dataclass(frozen=True)
class SMEConfig:
    """Integration settings for an ensemble of conditioned trajectories.

    ``observables=None`` records full states on the save grid; a (possibly
    empty) sequence of Hermitian matrices records their expectation values
    instead.  ``save_every`` thins the state/expectation grid (currents are
    always kept at full step resolution).  ``eig_floor=x`` projects a state
    back onto the PSD cone whenever an eigenvalue drops below ``-x``;
    ``None`` disables the projection.
    """

    dt: float
    t_final: float
    n_traj: int = 1
    seed: int = 0
    renormalize: bool = True
    eig_floor: float | None = 1e-8
    observables: tuple = None
    save_every: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < self.dt:
            raise ValueError(f"t_final {self.t_final} is shorter than one step")
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.save_every < 1:
            raise ValueError(f"save_every must be >= 1, got {self.save_every}")
        if self.observables is not None:
            obs = tuple(np.asarray(o, dtype=complex) for o in self.observables)
            object.__setattr__(self, "observables", obs)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class TrajectoryRecord:
    """One conditioned trajectory: states or expectations on the save grid, currents per step."""

    times: np.ndarray                  # (n_save,) save-grid times
    states: np.ndarray | None          # (n_save, d, d) or None in expectation mode
    expectations: np.ndarray | None    # (n_save, n_obs) complex, or None in state mode
    currents: np.ndarray               # (n_steps, R) float, units 1/time (y = ydt/dt)
    seed: int = 0
    stream_id: int = 0


def innovation_ops(model: SystemModel) -> np.ndarray:
    """Operators weighting the Wiener innovations, ``alpha_r = g_r - i hbar f_r``; (R, d, d)."""
    return measured_channel_ops(model) - 1j * model.hbar * model.feedback


def h_superop(a, rho) -> np.ndarray:
    """Normalized conditioning map ``H[a] rho = a rho + rho a^dag - Tr[a rho + rho a^dag] rho``."""
    a = np.asarray(a, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    x = a @ rho + rho @ a.conj().T
    return x - np.trace(x) * rho


def _psd_project(rho: np.ndarray) -> np.ndarray:
    """Clamp negative eigenvalues to zero and renormalize the trace."""
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return out / out.trace().real


def sme_step(model: SystemModel, rho, dw, dt: float, renormalize: bool = True,
             eig_floor: float | None = None):
    """One Euler-Maruyama step of the conditioned dynamics.

    Parameters
    ----------
    rho : (d, d) array
        State at the start of the step.
    dw : (R,) array
        Wiener increments for the step, each ~ N(0, dt).
    dt : float
        Step length.

    Returns
    -------
    (rho_next, ydt)
        The post-step state and the current increment ``y * dt`` satisfying
        ``hbar * ydt = <g + g^dag>_rho dt + hbar * dw`` (expectations taken
        in the pre-step state).

    With ``renormalize=False`` and ``eig_floor=None`` the raw linear update
    is returned; averaging over ``+dw`` and ``-dw`` then reproduces the
    deterministic drift exactly.
    """
    rho = np.asarray(rho, dtype=complex)
    dw = np.atleast_1d(np.asarray(dw, dtype=float))
    n_r = model.n_currents
    if dw.shape != (n_r,):
        raise DimensionMismatchError(f"dw shape {dw.shape} does not match R = {n_r}")
    if rho.shape != (model.dim, model.dim):
        raise DimensionMismatchError(
            f"state shape {rho.shape} does not match dim {model.dim}"
        )
    drift = full_liouvillian(model).apply(rho) * dt
    if n_r:
        a = np.tensordot(dw, innovation_ops(model), axes=1)
        cond = h_superop(a, rho) / model.hbar
    else:
        cond = 0.0
    xs = current_observables(model)
    exp_x = np.array([np.trace(x @ rho).real for x in xs])
    ydt = exp_x * (dt / model.hbar) + dw
    new = rho + drift + cond
    tr = new.trace().real
    if not np.isfinite(tr) or not (_TRACE_MIN < tr < _TRACE_MAX):
        raise StateDivergedError(f"state trace {tr} left ({_TRACE_MIN}, {_TRACE_MAX})")
    if renormalize:
        new = new / tr
    if eig_floor is not None:
        w_min = float(np.linalg.eigvalsh(0.5 * (new + new.conj().T))[0])
        if w_min < _EIG_ABORT:
            raise StateDivergedError(f"state eigenvalue {w_min:.3e} below {_EIG_ABORT}")
        if w_min < -eig_floor:
            new = _psd_project(new)
    return new, ydt


class _BatchEngine:
    """Precomputed step ingredients, applied to a whole batch of vectorized states."""

    def __init__(self, model: SystemModel, dt: float, renormalize: bool,
                 eig_floor: float | None):
        d = model.dim
        d2 = d * d
        self.d = d
        self.hbar = model.hbar
        self.dt = dt
        self.renormalize = renormalize
        self.eig_floor = eig_floor
        self.n_r = model.n_currents
        gen = full_liouvillian(model).matrix
        # one-step drift as a single matrix: vec(rho) + dt * G vec(rho)
        self.drift = np.eye(d2, dtype=complex) + dt * gen
        alphas = innovation_ops(model)
        self.innov = np.empty((self.n_r, d2, d2), dtype=complex)
        for r, a in enumerate(alphas):
            self.innov[r] = numkit.spre(a) + numkit.spost(a.conj().T)
        xs = current_observables(model)
        # conj(vec(X_r)) rows, so Tr[X_r rho] = xvecs[r] . vec(rho)
        self.xvecs = np.conj(xs.transpose(0, 2, 1).reshape(self.n_r, d2))
        self.diag_idx = np.arange(d) * (d + 1)

    def step(self, vs: np.ndarray, dw: np.ndarray, stream_offset: int = 0):
        """Advance a (B, d^2) batch by one step; returns (vs_next, ydt)."""
        if self.n_r:
            exp_x = (vs @ self.xvecs.T).real
            ydt = exp_x * (self.dt / self.hbar) + dw
        else:
            ydt = np.zeros((vs.shape[0], 0))
        new = vs @ self.drift.T
        if self.n_r:
            kicked = np.einsum("rkl,bl->brk", self.innov, vs)
            term = np.einsum("br,brk->bk", dw, kicked)
            tr_term = term[:, self.diag_idx].sum(axis=1)
            new = new + (term - tr_term[:, None] * vs) / self.hbar
        traces = new[:, self.diag_idx].sum(axis=1).real
        bad = ~np.isfinite(traces) | (traces <= _TRACE_MIN) | (traces >= _TRACE_MAX)
        if bad.any():
            b = int(np.nonzero(bad)[0][0])
            raise StateDivergedError(
                f"trajectory {stream_offset + b}: trace {traces[b]} left "
                f"({_TRACE_MIN}, {_TRACE_MAX})"
            )
        if self.renormalize:
            new = new / traces[:, None]
        if self.eig_floor is not None:
            new = self._floor(new, stream_offset)
        return new, ydt

    def _floor(self, vs: np.ndarray, stream_offset: int) -> np.ndarray:
        d = self.d
        mats = vs.reshape(-1, d, d).swapaxes(1, 2)  # undo column stacking
        w = np.linalg.eigvalsh(mats)
        w_min = w[:, 0]
        if w_min.min() < _EIG_ABORT:
            b = int(np.argmin(w_min))
            raise StateDivergedError(
                f"trajectory {stream_offset + b}: eigenvalue {w_min[b]:.3e} below {_EIG_ABORT}"
            )
        bad = np.nonzero(w_min < -self.eig_floor)[0]
        if bad.size == 0:
            return vs
        sub = 0.5 * (mats[bad] + mats[bad].conj().swapaxes(1, 2))
        wb, vb = np.linalg.eigh(sub)
        wb = np.clip(wb, 0.0, None)
        rebuilt = np.einsum("bik,bk,bjk->bij", vb, wb, vb.conj())
        rebuilt /= np.trace(rebuilt, axis1=1, axis2=2).real[:, None, None]
        vs = vs.copy() if not vs.flags.writeable else vs
        vs[bad] = rebuilt.swapaxes(1, 2).reshape(bad.size, d * d)
        return vs


def expectation_values(states, observables) -> np.ndarray:
    """Expectations ``Tr[O rho]`` for stacked states (..., d, d) and a list of observables."""
    states = np.asarray(states, dtype=complex)
    obs = [np.asarray(o, dtype=complex) for o in observables]
    out = np.empty(states.shape[:-2] + (len(obs),), dtype=complex)
    for k, o in enumerate(obs):
        out[..., k] = np.einsum("...ij,ji->...", states, o)
    return out


def run_trajectories(model: SystemModel, rho0, config: SMEConfig) -> list[TrajectoryRecord]:
    """Integrate ``config.n_traj`` conditioned trajectories from ``rho0``.

    Trajectory ``i`` consumes the Gaussian stream ``(config.seed, i)``, so
    results are reproducible for a fixed (model, rho0, config) regardless of
    how the ensemble is chunked internally.  Records come back in stream-id
    order.
    """
    rho0 = require_density_matrix(rho0, dim=model.dim)
    n_steps = config.n_steps
    n_r = model.n_currents
    d = model.dim
    full_times = np.arange(n_steps + 1) * config.dt
    save_idx = np.arange(0, n_steps + 1, config.save_every)
    if save_idx[-1] != n_steps:
        save_idx = np.append(save_idx, n_steps)
    save_times = full_times[save_idx]
    save_mask = np.zeros(n_steps + 1, dtype=bool)
    save_mask[save_idx] = True
    save_pos = np.cumsum(save_mask) - 1  # step index -> slot in the save grid

    record_states = config.observables is None
    if not record_states:
        obs_vecs = np.array(
            [o.T.reshape(-1).conj() for o in config.observables]
        ).reshape(len(config.observables), d * d)

    engine = _BatchEngine(model, config.dt, config.renormalize, config.eig_floor)
    v0 = numkit.vectorize(rho0)

    records: list[TrajectoryRecord] = []
    for start in range(0, config.n_traj, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, config.n_traj))
        n_b = ids.size
        noise = np.empty((n_b, n_steps, n_r))
        for b, sid in enumerate(ids):
            noise[b] = numkit.GaussianStream(config.seed, int(sid), config.dt).draw_block(
                n_steps, n_r
            )
        vs = np.tile(v0, (n_b, 1))
        currents = np.empty((n_b, n_steps, n_r))
        if record_states:
            saved = np.empty((n_b, save_times.size, d, d), dtype=complex)
        else:
            saved = np.empty((n_b, save_times.size, len(config.observables)), dtype=complex)

        def _snapshot(step_k, vs_now):
            slot = save_pos[step_k]
            if record_states:
                saved[:, slot] = vs_now.reshape(n_b, d, d).swapaxes(1, 2)
            else:
                saved[:, slot] = vs_now @ obs_vecs.T

        if save_mask[0]:
            _snapshot(0, vs)
        for k in range(n_steps):
            vs, ydt = engine.step(vs, noise[:, k, :], stream_offset=start)
            currents[:, k, :] = ydt / config.dt
            if save_mask[k + 1]:
                _snapshot(k + 1, vs)

        for b, sid in enumerate(ids):
            records.append(
                TrajectoryRecord(
                    times=save_times.copy(),
                    states=saved[b].copy() if record_states else None,
                    expectations=None if record_states else saved[b].copy(),
                    currents=currents[b].copy(),
                    seed=config.seed,
                    stream_id=int(sid),
                )
            )
    return records


def _common_times(records) -> np.ndarray:
    if not records:
        raise ValueError("no records given")
    times = records[0].times
    for rec in records[1:]:
        if rec.times.shape != times.shape or not np.array_equal(rec.times, times):
            raise GridMismatchError("trajectory records do not share a time grid")
    return times


def average_states(records) -> np.ndarray:
    """Pointwise ensemble mean of full-state records; (n_save, d, d)."""
    _common_times(records)
    if any(rec.states is None for rec in records):
        raise ValueError("average_states needs full-state records")
    acc = np.zeros_like(records[0].states)
    for rec in records:
        acc += rec.states
    return acc / len(records)


def average_expectations(records):
    """Ensemble mean and standard error of expectation records; two (n_save, n_obs) arrays."""
    _common_times(records)
    if any(rec.expectations is None for rec in records):
        raise ValueError("average_expectations needs expectation records")
    stack = np.array([rec.expectations for rec in records])
    mean = stack.mean(axis=0)
    if len(records) > 1:
        se = stack.std(axis=0, ddof=1) / np.sqrt(len(records))
    else:
        se = np.full_like(mean, np.nan, dtype=float)
    return mean, np.abs(se)
