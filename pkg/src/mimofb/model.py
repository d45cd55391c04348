"""System description: coupling operators, measurement matrix, feedback operators.

A :class:`SystemModel` bundles everything needed to build generators and run
trajectories: a Hamiltonian, ``L`` bath coupling operators, an ``L x R``
measurement matrix mapping output channels onto ``R`` recorded currents, and
``R`` Hermitian feedback operators (one per current).
"""

from dataclasses import dataclass

import numpy as np

from . import numkit
from .errors import DimensionMismatchError, EfficiencyError, NotDiagonalError

#: Default tolerance for model validation (Hermiticity, efficiency range).
MODEL_TOL = 1e-9


def as_vop(ops, dim: int | None = None, hermitian: bool = False,
           tol: float = MODEL_TOL, name: str = "operator vector") -> np.ndarray:
    """Stack a sequence of same-dimension square operators into an (n, d, d) array.

    ``dim`` is only required when ``ops`` is empty.  With ``hermitian=True``
    every component must be Hermitian within ``tol``.
    """
    if isinstance(ops, np.ndarray) and ops.ndim == 3:
        arr = np.array(ops, dtype=complex)
    else:
        mats = [np.asarray(a, dtype=complex) for a in ops]
        if not mats:
            if dim is None:
                raise DimensionMismatchError(f"{name}: empty and no dim given")
            return np.zeros((0, dim, dim), dtype=complex)
        if any(m.shape != mats[0].shape for m in mats):
            raise DimensionMismatchError(
                f"{name}: components have mixed shapes "
                f"{sorted({m.shape for m in mats})}"
            )
        arr = np.array(mats, dtype=complex)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionMismatchError(f"{name}: components must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatchError(
            f"{name}: components are {arr.shape[1]}-dimensional, expected {dim}"
        )
    if hermitian:
        for k, a in enumerate(arr):
            numkit.require_hermitian(a, tol, name=f"{name}[{k}]")
    return arr


@dataclass(frozen=True)
class Measurement:
    """Linear map from output channels to recorded currents.

    Attributes
    ----------
    matrix : (L, R) complex ndarray
        Row ``l`` states how channel ``l`` is distributed over the currents.
        Validity requires ``matrix @ matrix^dag = hbar * diag(eta)`` with
        every efficiency ``eta_l`` in [0, 1]; see
        :func:`measurement_efficiencies`.
    hbar : float
        Scale of the current shot noise (action units).
    """

    matrix: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2:
            raise DimensionMismatchError(f"measurement matrix must be 2-D, got shape {m.shape}")
        if self.hbar <= 0.0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_currents(self) -> int:
        return self.matrix.shape[1]


def measurement_efficiencies(meas: Measurement, tol: float = MODEL_TOL) -> np.ndarray:
    """Validate ``M M^dag / hbar = diag(eta)`` and return the efficiencies.

    Raises NotDiagonalError when the channel covariance has off-diagonal
    entries beyond ``tol`` and EfficiencyError when a diagonal entry leaves
    [0, 1] by more than ``tol``.  The returned vector is clamped into [0, 1].
    """
    m = meas.matrix
    cov = (m @ m.conj().T) / meas.hbar
    off = cov - np.diag(np.diag(cov))
    off_res = numkit.max_abs(off)
    if off_res > tol:
        raise NotDiagonalError(
            f"M M^dag / hbar is not diagonal: max off-diagonal {off_res:.3e} exceeds tol {tol:.3e}"
        )
    eta = np.real(np.diag(cov)).copy()
    if eta.size and (eta.min() < -tol or eta.max() > 1.0 + tol):
        raise EfficiencyError(
            f"efficiencies {eta} leave [0, 1] by more than tol {tol:.3e}"
        )
    return np.clip(eta, 0.0, 1.0)


def noise_covariance(meas: Measurement, tol: float = MODEL_TOL) -> np.ndarray:
    """Residual-noise covariance ``Z = hbar * I_R - M^dag M``.

    For a valid measurement this is Hermitian PSD (the singular values of M
    cannot exceed sqrt(hbar)); validation errors from
    :func:`measurement_efficiencies` propagate.
    """
    measurement_efficiencies(meas, tol)
    r = meas.n_currents
    z = meas.hbar * np.eye(r) - meas.matrix.conj().T @ meas.matrix
    return 0.5 * (z + z.conj().T)


@dataclass(frozen=True)
class SystemModel:
    """Complete description of a monitored-and-fed-back open system.

    Attributes
    ----------
    dim : int
        Hilbert-space dimension d.
    hbar : float
        Action scale; must match the measurement's.
    hamiltonian : (d, d) ndarray
        Hermitian system Hamiltonian (the feedback-free part).
    coupling : (L, d, d) ndarray
        Bath coupling operators, one per output channel.
    feedback : (R, d, d) ndarray
        Hermitian feedback operators, one per recorded current.  The current
        signal is fed back proportionally to these.
    measurement : Measurement
        The (L, R) current map.  ``R <= 2L`` is enforced: each channel
        supports at most two independent quadrature currents.
    """

    dim: int
    hbar: float
    hamiltonian: np.ndarray
    coupling: np.ndarray
    feedback: np.ndarray
    measurement: Measurement

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise DimensionMismatchError(f"dim must be >= 1, got {d}")
        h = numkit.require_hermitian(self.hamiltonian, MODEL_TOL, name="hamiltonian").copy()
        if h.shape != (d, d):
            raise DimensionMismatchError(f"hamiltonian shape {h.shape} does not match dim {d}")
        c = as_vop(self.coupling, dim=d, name="coupling")
        f = as_vop(self.feedback, dim=d, hermitian=True, name="feedback")
        meas = self.measurement
        if not isinstance(meas, Measurement):
            meas = Measurement(np.asarray(meas), float(self.hbar))
        if abs(meas.hbar - self.hbar) > 0.0:
            raise ValueError(
                f"measurement hbar {meas.hbar} differs from model hbar {self.hbar}"
            )
        n_l, n_r = c.shape[0], f.shape[0]
        if meas.matrix.shape != (n_l, n_r):
            raise DimensionMismatchError(
                f"measurement matrix shape {meas.matrix.shape} does not match "
                f"{n_l} channels x {n_r} currents"
            )
        if n_r > 2 * n_l:
            raise DimensionMismatchError(
                f"R = {n_r} currents exceed 2L = {2 * n_l}: at most two quadratures per channel"
            )
        measurement_efficiencies(meas)
        for arr in (h, c, f):
            arr.setflags(write=False)
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "hbar", float(self.hbar))
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "coupling", c)
        object.__setattr__(self, "feedback", f)
        object.__setattr__(self, "measurement", meas)

    @property
    def n_channels(self) -> int:
        """Number of output channels L."""
        return self.coupling.shape[0]

    @property
    def n_currents(self) -> int:
        """Number of recorded currents R."""
        return self.feedback.shape[0]


def measured_channel_ops(model: SystemModel) -> np.ndarray:
    """Per-current combinations of coupling operators, ``g_r = sum_l conj(M)_{lr} c_l``.

    The r-th recorded current reads out the quadrature ``g_r + g_r^dag``.
    Returns an (R, d, d) array.
    """
    return np.einsum(
        "lr,lij->rij", model.measurement.matrix.conj(), model.coupling
    )


def current_observables(model: SystemModel) -> np.ndarray:
    """Hermitian observables whose expectations give the mean currents, ``X_r = g_r + g_r^dag``."""
    g = measured_channel_ops(model)
    return g + g.conj().transpose(0, 2, 1)


def homodyne_model(c, f, eta: float, hbar: float = 1.0,
                   hamiltonian=None) -> SystemModel:
    """Single channel, single current: homodyne detection of one quadrature.

    The measurement matrix is the scalar ``sqrt(hbar * eta)``.
    """
    c = np.asarray(c, dtype=complex)
    d = c.shape[0]
    if not 0.0 <= eta <= 1.0:
        raise EfficiencyError(f"eta must lie in [0, 1], got {eta}")
    if hamiltonian is None:
        hamiltonian = np.zeros((d, d), dtype=complex)
    meas = Measurement(np.array([[np.sqrt(hbar * eta)]], dtype=complex), hbar)
    return SystemModel(dim=d, hbar=hbar, hamiltonian=hamiltonian,
                       coupling=[c], feedback=[f], measurement=meas)


def heterodyne_model(c, f1, f2, eta: float, hbar: float = 1.0,
                     hamiltonian=None) -> SystemModel:
    """Single channel, two currents: both quadratures read out simultaneously.

    The measurement matrix is ``sqrt(hbar * eta / 2) * [1, i]``: the channel
    signal is split evenly between the two currents.
    """
    c = np.asarray(c, dtype=complex)
    d = c.shape[0]
    if not 0.0 <= eta <= 1.0:
        raise EfficiencyError(f"eta must lie in [0, 1], got {eta}")
    if hamiltonian is None:
        hamiltonian = np.zeros((d, d), dtype=complex)
    meas = Measurement(
        np.sqrt(hbar * eta / 2.0) * np.array([[1.0, 1.0j]], dtype=complex), hbar
    )
    return SystemModel(dim=d, hbar=hbar, hamiltonian=hamiltonian,
                       coupling=[c], feedback=[f1, f2], measurement=meas)
