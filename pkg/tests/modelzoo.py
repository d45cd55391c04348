"""Shared fixtures-in-spirit: operators and random model generators for the tests."""

import numpy as np

from mimofb import Measurement, SystemModel

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
# lowering operator in the |0> = ground, |1> = excited convention
SM = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
EXCITED = np.diag([0.0, 1.0]).astype(complex)
GROUND = np.diag([1.0, 0.0]).astype(complex)


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / rho.trace()


def random_unitary(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_measurement(rng, n_channels, n_currents, hbar=1.0, etas=None):
    """A valid (L, R) measurement matrix: orthogonal rows scaled to sqrt(hbar*eta_l).

    At most ``min(L, R)`` rows can be non-zero (orthogonality in R columns);
    the rest get efficiency zero.
    """
    active = min(n_channels, n_currents)
    if etas is None:
        etas = np.zeros(n_channels)
        etas[:active] = rng.uniform(0.0, 1.0, size=active)
    u = random_unitary(rng, n_currents)
    m = np.zeros((n_channels, n_currents), dtype=complex)
    for l in range(active):
        m[l] = np.sqrt(hbar * etas[l]) * u[l]
    return Measurement(m, hbar)


def random_model(rng, d, n_channels, n_currents, hbar=1.0):
    """A fully random valid model with the requested shape."""
    return SystemModel(
        dim=d,
        hbar=hbar,
        hamiltonian=random_hermitian(rng, d),
        coupling=[rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
                  for _ in range(n_channels)],
        feedback=[random_hermitian(rng, d) for _ in range(n_currents)],
        measurement=random_measurement(rng, n_channels, n_currents, hbar),
    )
