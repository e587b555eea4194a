"""Planar-array Rician channel under the far-field assumption.

Antenna positions live in a square region in the x-y plane and are given
as a (2, M) array of coordinates.  For a user arriving from elevation
theta_e and azimuth theta_a, the path difference of the antenna at
position t = (x, y) relative to the origin is

    rho(t) = x sin(theta_e) cos(theta_a) + y cos(theta_e)

and the line-of-sight response has entries exp(j 2 pi rho / wavelength).
The channel sums a deterministic LoS part and i.i.d. circular Gaussian
scatter:

    h = sqrt(nlos_power * rician) * hbar + sqrt(nlos_power) * htilde.

Functions broadcast over leading axes of `layout`, so a batch of
candidate layouts of shape (..., 2, M) evaluates in one call.
"""

from __future__ import annotations

import numpy as np

from .scenario import UserStats


def user_direction(user: UserStats) -> np.ndarray:
    """Unit-free direction pair (sin e cos a, cos e) for one user."""
    return np.array(
        [np.sin(user.elevation) * np.cos(user.azimuth), np.cos(user.elevation)]
    )


def user_directions(users) -> np.ndarray:
    """Stack `user_direction` over users into a (K, 2) array."""
    return np.stack([user_direction(u) for u in users])


def phase_offset(layout: np.ndarray, elevation: float, azimuth: float) -> np.ndarray:
    """Path difference rho(t) in meters for every antenna, shape (..., M)."""
    layout = np.asarray(layout, dtype=float)
    d = np.array([np.sin(elevation) * np.cos(azimuth), np.cos(elevation)])
    return np.einsum("d,...dm->...m", d, layout)


def los_vector(layout: np.ndarray, user: UserStats, wavelength: float) -> np.ndarray:
    """Line-of-sight response for one user, unit-modulus entries, (..., M)."""
    rho = phase_offset(layout, user.elevation, user.azimuth)
    return np.exp(2j * np.pi / wavelength * rho)


def los_matrix(layout: np.ndarray, users, wavelength: float) -> np.ndarray:
    """LoS responses of all users side by side, shape (..., M, K)."""
    layout = np.asarray(layout, dtype=float)
    dirs = user_directions(users)  # (K, 2)
    rho = np.einsum("kd,...dm->...mk", dirs, layout)
    return np.exp(2j * np.pi / wavelength * rho)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circular complex Gaussian, unit variance per entry."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def sample_channel(
    layout: np.ndarray,
    users,
    wavelength: float,
    rng: np.random.Generator,
    trials: int | None = None,
) -> np.ndarray:
    """Draw the composite channel matrix.

    Returns shape (M, K), or (trials, M, K) when `trials` is given.  The
    LoS part is fixed by the layout; only the scatter is random.
    """
    hbar = los_matrix(layout, users, wavelength)  # (M, K)
    scale = np.array([u.nlos_power for u in users])
    # per-entry LoS amplitude sqrt(nlos_power * rician), scatter std sqrt(nlos_power)
    los_amp = np.sqrt(scale * np.array([u.rician for u in users]))
    shape = hbar.shape if trials is None else (trials,) + hbar.shape
    htilde = complex_normal(rng, shape)
    return los_amp * hbar + np.sqrt(scale) * htilde
