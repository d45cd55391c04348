"""Generators of the unconditional dynamics, assembled as dense superoperators.

All builders fold ``hbar`` into the generator, so a :class:`Superoperator`
``S`` always propagates as ``rho(t) = devec(expm(S.matrix * t) @ vec(rho0))``
with ``t`` in ordinary time units.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import numkit
from .errors import (
    DimensionMismatchError,
    InvalidSquareRootError,
    InvalidStateError,
)
from .model import (
    SystemModel,
    as_vop,
    measured_channel_ops,
    noise_covariance,
)


@dataclass(frozen=True)
class Superoperator:
    """A linear map on vectorized operators: ``d vec(rho)/dt = matrix @ vec(rho)``."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d2 = self.dim * self.dim
        if m.shape != (d2, d2):
            raise DimensionMismatchError(
                f"superoperator matrix shape {m.shape} does not match dim {self.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, rho) -> np.ndarray:
        """Act on a density matrix and return the (matrix-shaped) result."""
        return numkit.devectorize(self.matrix @ numkit.vectorize(rho))

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionMismatchError(
                f"cannot add superoperators of dims {self.dim} and {other.dim}"
            )
        return Superoperator(self.dim, self.matrix + other.matrix)


def hamiltonian_term(h) -> np.ndarray:
    """Matrix of ``rho -> -i [h, rho]``."""
    h = np.asarray(h, dtype=complex)
    return -1j * (numkit.spre(h) - numkit.spost(h))


def dissipator(ops, dim: int | None = None) -> Superoperator:
    """Sum of Lindblad dissipators ``sum_k (a_k . a_k^dag - {a_k^dag a_k, .}/2)``.

    ``ops`` may be a single operator, a sequence of operators or an
    (n, d, d) array; an empty sequence (with ``dim`` given) yields the zero
    superoperator.
    """
    arr = np.asarray(ops)
    if arr.ndim == 2:
        ops = [arr]
    vop = as_vop(ops, dim=dim, name="dissipator operators")
    d = vop.shape[1]
    g = np.zeros((d * d, d * d), dtype=complex)
    eye = np.eye(d)
    for a in vop:
        ada = a.conj().T @ a
        g += numkit.sandwich(a, a.conj().T)
        g -= 0.5 * (np.kron(eye, ada) + np.kron(ada.T, eye))
    return Superoperator(d, g)


def measurement_liouvillian(model: SystemModel) -> Superoperator:
    """Generator of the measured-but-not-fed-back dynamics.

    ``(-i [H, .] + sum_l D[c_l]) / hbar``; the measurement matrix plays no
    role here because averaging over records erases the conditioning.
    """
    g = hamiltonian_term(model.hamiltonian)
    g = g + dissipator(model.coupling, model.dim).matrix
    return Superoperator(model.dim, g / model.hbar)


def feedback_liouvillian(model: SystemModel) -> Superoperator:
    """Feedback contribution to the generator.

    Consists of the dissipation caused by feeding back white-noise currents,
    ``hbar * sum_r D[f_r]``, plus the measurement-feedback cross terms
    ``-i sum_r [f_r, g_r rho + rho g_r^dag]`` with
    ``g_r = sum_l conj(M)_{lr} c_l``; everything divided by ``hbar``.
    """
    d = model.dim
    g = model.hbar * dissipator(model.feedback, d).matrix
    meas_ops = measured_channel_ops(model)
    for f_r, g_r in zip(model.feedback, meas_ops):
        cross = (
            numkit.spre(f_r @ g_r)
            + numkit.sandwich(f_r, g_r.conj().T)
            - numkit.sandwich(g_r, f_r)
            - numkit.spost(g_r.conj().T @ f_r)
        )
        g = g - 1j * cross
    return Superoperator(d, g / model.hbar)


def full_liouvillian(model: SystemModel) -> Superoperator:
    """Generator of the closed-loop dynamics: measurement plus feedback parts."""
    return measurement_liouvillian(model) + feedback_liouvillian(model)


def lindblad_form(model: SystemModel, root=None,
                  tol: float = numkit.DEFAULT_TOL) -> Superoperator:
    """The closed-loop generator assembled from its manifest Lindblad decomposition.

    The same map as :func:`full_liouvillian`, but built from an effective
    Hamiltonian ``H + (1/2) sum_r (f_r g_r + g_r^dag f_r)``, shifted jump
    operators ``c_l - i sum_r M_{lr} f_r`` and residual-noise jump operators
    ``sum_s B_{rs} f_s``, where ``B^dag B`` equals the noise covariance
    ``Z = hbar I - M^dag M``.

    Parameters
    ----------
    root : optional (R, R) array
        Any square root ``B`` of ``Z``.  Defaults to the PSD square root;
        the generator is independent of the choice.  A matrix with
        ``max|B^dag B - Z| > tol`` raises InvalidSquareRootError.
    """
    d = model.dim
    z = noise_covariance(model.measurement)
    if root is None:
        root = numkit.psd_sqrt(z, tol)
    else:
        root = np.asarray(root, dtype=complex)
        residual = numkit.max_abs(root.conj().T @ root - z)
        if residual > tol:
            raise InvalidSquareRootError(
                f"max |B^dag B - Z| = {residual:.3e} exceeds tol {tol:.3e}"
            )
    meas_ops = measured_channel_ops(model)
    h_eff = np.array(model.hamiltonian)
    for f_r, g_r in zip(model.feedback, meas_ops):
        h_eff += 0.5 * (f_r @ g_r + g_r.conj().T @ f_r)
    shifted = model.coupling - 1j * np.einsum(
        "lr,rij->lij", model.measurement.matrix, model.feedback
    )
    residual_jumps = np.einsum("rs,sij->rij", root, model.feedback)
    g = hamiltonian_term(h_eff)
    g = g + dissipator(shifted, d).matrix
    g = g + dissipator(residual_jumps, d).matrix
    return Superoperator(d, g / model.hbar)


def adjoint(s: Superoperator) -> Superoperator:
    """Adjoint generator under the Hilbert-Schmidt pairing.

    Satisfies ``Tr[A^dag (S rho)] = Tr[(S^adj A)^dag rho]``; with column
    stacking this is simply the conjugate transpose of the matrix.  Applied
    to observables it generates Heisenberg-picture evolution.
    """
    return Superoperator(s.dim, s.matrix.conj().T)


@dataclass(frozen=True)
class CPReport:
    """Result of a short-time complete-positivity probe."""

    t: float
    min_eigenvalue: float
    tol: float
    passed: bool


def cp_check(s: Superoperator, t: float = 1e-3,
             tol: float = numkit.DEFAULT_TOL) -> CPReport:
    """Probe complete positivity of the short-time channel ``expm(S t)``.

    Builds the Choi matrix of the channel by acting on all matrix units and
    reports its minimum eigenvalue; a legitimate Lindblad generator gives a
    value no lower than roundoff, while e.g. a sign-flipped dissipator fails
    at order ``t``.
    """
    d = s.dim
    prop = scipy.linalg.expm(s.matrix * t)
    choi = np.zeros((d * d, d * d), dtype=complex)
    unit = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            unit[i, j] = 1.0
            mapped = numkit.devectorize(prop[:, j * d + i])
            choi += np.kron(unit, mapped)
            unit[i, j] = 0.0
    choi = 0.5 * (choi + choi.conj().T)
    min_eig = float(np.linalg.eigvalsh(choi)[0])
    return CPReport(t=t, min_eigenvalue=min_eig, tol=tol, passed=min_eig >= -tol)


def trace_residual(s: Superoperator) -> float:
    """Max-norm of ``vec(I)^dag @ matrix``; zero for trace-preserving generators."""
    return numkit.max_abs(numkit.vectorize(np.eye(s.dim)).conj() @ s.matrix)


def require_density_matrix(rho, dim: int | None = None,
                           herm_tol: float = 1e-9,
                           trace_tol: float = 1e-9,
                           eig_tol: float = 1e-8) -> np.ndarray:
    """Validate a density matrix, raising InvalidStateError on failure."""
    try:
        rho = numkit.require_square(rho, name="state")
    except DimensionMismatchError as exc:
        raise InvalidStateError(str(exc)) from exc
    if dim is not None and rho.shape[0] != dim:
        raise InvalidStateError(f"state dimension {rho.shape[0]} does not match {dim}")
    res = numkit.hermiticity_residual(rho)
    if res > herm_tol:
        raise InvalidStateError(f"state not Hermitian: residual {res:.3e}")
    tr = rho.trace()
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"state trace {tr} differs from 1 beyond {trace_tol:.1e}")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w[0] < -eig_tol:
        raise InvalidStateError(f"state has eigenvalue {w[0]:.3e} below -{eig_tol:.1e}")
    return rho


def evolve_unconditional(s: Superoperator, rho0, times) -> np.ndarray:
    """Propagate ``rho0`` under ``expm(S t)`` for every ``t`` in ``times``.

    Returns an (n_times, d, d) array.  The initial state is validated, and
    every propagated state is checked to stay physical (unit trace within
    1e-9, eigenvalues above -1e-8); violations raise InvalidStateError since
    they indicate a non-trace-preserving or non-CP generator.
    """
    rho0 = require_density_matrix(rho0, dim=s.dim)
    v0 = numkit.vectorize(rho0)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty((times.size, s.dim, s.dim), dtype=complex)
    for k, t in enumerate(times):
        rho = numkit.devectorize(numkit.expm_action(s.matrix, v0, t))
        tr = rho.trace()
        if abs(tr - 1.0) > 1e-9:
            raise InvalidStateError(
                f"propagated state at t={t} has trace {tr}: generator not trace-preserving?"
            )
        w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if w[0] < -1e-8:
            raise InvalidStateError(
                f"propagated state at t={t} has eigenvalue {w[0]:.3e}: generator not CP?"
            )
        out[k] = rho
    return out
