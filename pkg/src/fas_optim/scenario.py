"""Scenario definitions: system geometry, user statistics, solver settings.

A scenario bundles everything the rate expressions and the position
optimizers need: array size, movement region, transmit/noise powers,
frame structure, and per-user large-scale statistics.  Scenarios are
built programmatically or loaded from INI files (see `load_scenario`).

Lengths are in meters, powers in watts, angles in radians.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass

import numpy as np


class ScenarioError(ValueError):
    """Raised when a scenario file or parameter set is inconsistent."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class UserStats:
    """Large-scale state of one uplink user.

    `path_loss` is the total average channel gain per antenna, split into
    a line-of-sight part and a diffuse part by the Rician factor:
    per-entry LoS power is `nlos_power * rician` and diffuse power is
    `nlos_power`, with ``nlos_power = path_loss / (rician + 1)``.
    `est_gain` is the LMMSE weight applied to the pilot observation,
    ``est_gain = nlos_power / (nlos_power + noise_over_taup)``.
    """

    path_loss: float
    rician: float
    elevation: float
    azimuth: float
    nlos_power: float
    est_gain: float


def derive_user(
    distance: float,
    elevation: float,
    azimuth: float,
    *,
    noise_over_taup: float,
    rician: float = 6.0,
    path_loss_ref: float = 1e-4,
    path_loss_exp: float = 2.8,
) -> UserStats:
    """Build a `UserStats` from geometry and the large-scale model.

    Path loss follows ``path_loss_ref * distance ** -path_loss_exp`` with
    the reference gain taken at 1 m.  `noise_over_taup` is the noise power
    divided by total pilot energy (sigma^2 / (tau * p)), which sets the
    estimator gain.
    """
    if distance <= 0:
        raise ScenarioError(f"distance must be positive, got {distance}")
    if rician < 0:
        raise ScenarioError(f"rician must be nonnegative, got {rician}")
    if not 0.0 <= elevation <= math.pi:
        raise ScenarioError(f"elevation out of [0, pi]: {elevation}")
    if not 0.0 <= azimuth <= math.pi:
        raise ScenarioError(f"azimuth out of [0, pi]: {azimuth}")
    if noise_over_taup <= 0:
        raise ScenarioError("noise_over_taup must be positive")
    path_loss = path_loss_ref * distance ** (-path_loss_exp)
    nlos_power = path_loss / (rician + 1.0)
    est_gain = nlos_power / (nlos_power + noise_over_taup)
    return UserStats(path_loss, rician, elevation, azimuth, nlos_power, est_gain)


def random_users(
    seed,
    count: int,
    *,
    noise_over_taup: float,
    d_range: tuple[float, float] = (50.0, 70.0),
    rician: float = 6.0,
    path_loss_ref: float = 1e-4,
    path_loss_exp: float = 2.8,
) -> tuple[UserStats, ...]:
    """Draw `count` users with uniform distances and arrival angles."""
    rng = np.random.default_rng(seed)
    lo, hi = d_range
    if not 0 < lo <= hi:
        raise ScenarioError(f"bad distance range {d_range}")
    dist = rng.uniform(lo, hi, count)
    elev = rng.uniform(0.0, math.pi, count)
    azim = rng.uniform(0.0, math.pi, count)
    return tuple(
        derive_user(
            dist[k],
            elev[k],
            azim[k],
            noise_over_taup=noise_over_taup,
            rician=rician,
            path_loss_ref=path_loss_ref,
            path_loss_exp=path_loss_exp,
        )
        for k in range(count)
    )


@dataclass(frozen=True)
class UserModel:
    """Recipe for redrawing users, kept so sweeps can resample per repeat."""

    seed: int
    count: int
    d_range: tuple[float, float]
    rician: float
    path_loss_ref: float
    path_loss_exp: float


@dataclass(frozen=True)
class HyperParams:
    """Solver settings shared by the genetic and gradient optimizers."""

    mu: float = 100.0        # min-rate smoothing sharpness
    omega: float = 10.0      # spacing penalty per violating pair
    kappa: float = 0.8       # line-search shrink factor
    varpi: float = 0.5       # line-search sufficient-increase slope
    ga_pop: int = 100
    ga_max_iter: int = 500
    grad_max_iter: int = 1000
    grad_tol: float = 1e-4
    mc_trials: int = 100_000
    seed: int = 1


@dataclass(frozen=True)
class Scenario:
    """Full problem instance for rate evaluation and position design."""

    m_antennas: int
    k_users: int
    wavelength: float
    region_size: float
    d_min: float
    tx_power: float
    noise_power: float
    coherence_len: int
    pilot_len: int
    users: tuple[UserStats, ...]
    hyper: HyperParams = HyperParams()
    user_model: UserModel | None = None

    @property
    def noise_over_taup(self) -> float:
        return self.noise_power / (self.pilot_len * self.tx_power)

    @property
    def prelog(self) -> float:
        return (self.coherence_len - self.pilot_len) / self.coherence_len


def validate_scenario(scn: Scenario) -> Scenario:
    """Check scenario invariants, raising `ScenarioError` naming the field."""
    if scn.m_antennas < 1:
        raise ScenarioError(f"m_antennas must be >= 1, got {scn.m_antennas}")
    if scn.k_users < 1:
        raise ScenarioError(f"k_users must be >= 1, got {scn.k_users}")
    if scn.wavelength <= 0:
        raise ScenarioError(f"wavelength must be positive, got {scn.wavelength}")
    if scn.region_size <= 0:
        raise ScenarioError(f"region_size must be positive, got {scn.region_size}")
    if scn.d_min < 0:
        raise ScenarioError(f"d_min must be nonnegative, got {scn.d_min}")
    if scn.tx_power <= 0:
        raise ScenarioError(f"tx_power must be positive, got {scn.tx_power}")
    if scn.noise_power <= 0:
        raise ScenarioError(f"noise_power must be positive, got {scn.noise_power}")
    if scn.pilot_len < scn.k_users:
        raise ScenarioError(
            f"pilot_len < k_users ({scn.pilot_len} < {scn.k_users}): "
            "orthogonal pilots need one column per user"
        )
    if scn.pilot_len >= scn.coherence_len:
        raise ScenarioError(
            f"pilot_len must leave room for data: {scn.pilot_len} >= "
            f"coherence_len {scn.coherence_len}"
        )
    if len(scn.users) != scn.k_users:
        raise ScenarioError(
            f"k_users is {scn.k_users} but {len(scn.users)} users given"
        )
    for k, u in enumerate(scn.users):
        if not 0 < u.est_gain < 1:
            raise ScenarioError(f"user {k}: est_gain out of (0, 1): {u.est_gain}")
        if not math.isclose(
            u.nlos_power * (u.rician + 1.0), u.path_loss, rel_tol=1e-9
        ):
            raise ScenarioError(f"user {k}: nlos_power inconsistent with path_loss")
    h = scn.hyper
    if h.mu <= 0:
        raise ScenarioError(f"mu must be positive, got {h.mu}")
    if h.omega < 0:
        raise ScenarioError(f"omega must be nonnegative, got {h.omega}")
    if not 0 < h.kappa < 1:
        raise ScenarioError(f"kappa must lie in (0, 1), got {h.kappa}")
    if not 0 < h.varpi < 1:
        raise ScenarioError(f"varpi must lie in (0, 1), got {h.varpi}")
    if h.ga_pop < 2:
        raise ScenarioError(f"ga_pop must be >= 2, got {h.ga_pop}")
    return scn


def redraw_users(scn: Scenario, seed, *, count: int | None = None) -> Scenario:
    """Resample users from the stored recipe, keeping everything else.

    `count` overrides the user number; pilot length tracks it so pilots
    stay orthogonal.  Requires the scenario to carry a `user_model`.
    """
    if scn.user_model is None:
        raise ScenarioError("scenario has no user model to redraw from")
    model = scn.user_model
    k = model.count if count is None else count
    pilot_len = scn.pilot_len
    if count is not None and count != scn.k_users:
        # keep tau = K when the user count is swept
        pilot_len = count
    probe = dataclasses.replace(
        scn, k_users=k, pilot_len=pilot_len, users=scn.users[:0]
    )
    users = random_users(
        seed,
        k,
        noise_over_taup=probe.noise_over_taup,
        d_range=model.d_range,
        rician=model.rician,
        path_loss_ref=model.path_loss_ref,
        path_loss_exp=model.path_loss_exp,
    )
    out = dataclasses.replace(
        scn,
        k_users=k,
        pilot_len=pilot_len,
        users=users,
        user_model=dataclasses.replace(model, seed=_as_seed_int(seed), count=k),
    )
    return validate_scenario(out)


def _as_seed_int(seed) -> int:
    return int(seed) if np.isscalar(seed) else 0


def upa_layout(m_antennas: int, pitch: float, region_size: float) -> np.ndarray:
    """Centered rectangular grid of `m_antennas` positions.

    Uses ceil(sqrt(M)) columns, filling rows from the bottom-left; a
    partial top row is allowed.  Returns a (2, M) array of coordinates.
    Raises `ScenarioError` if the grid does not fit in the square region
    of side `region_size` centered at the origin.

    >>> upa_layout(4, 0.05, 0.6).shape
    (2, 4)
    """
    if m_antennas < 1:
        raise ScenarioError(f"m_antennas must be >= 1, got {m_antennas}")
    if pitch <= 0:
        raise ScenarioError(f"pitch must be positive, got {pitch}")
    ncols = math.isqrt(m_antennas)
    if ncols * ncols < m_antennas:
        ncols += 1
    nrows = -(-m_antennas // ncols)
    half = region_size / 2.0
    if (ncols - 1) / 2.0 * pitch > half or (nrows - 1) / 2.0 * pitch > half:
        raise ScenarioError(
            f"layout does not fit region: {nrows}x{ncols} grid at pitch "
            f"{pitch} exceeds side {region_size}"
        )
    idx = np.arange(m_antennas)
    col = idx % ncols
    row = idx // ncols
    x = (col - (ncols - 1) / 2.0) * pitch
    y = (row - (nrows - 1) / 2.0) * pitch
    return np.stack([x, y])


_SYSTEM_KEYS = {
    "m_antennas",
    "k_users",
    "wavelength_m",
    "region_size_m",
    "d_min_m",
    "tx_power_dbm",
    "noise_power_dbm",
    "coherence_len",
    "pilot_len",
}
_USER_SHARED_KEYS = {
    "rician",
    "rician_db",
    "path_loss_ref_db",
    "path_loss_exp",
    "seed",
    "count",
    "d_min_m",
    "d_max_m",
}
_HYPER_KEYS = {
    "mu",
    "omega",
    "kappa",
    "varpi",
    "ga_pop",
    "ga_max_iter",
    "grad_max_iter",
    "grad_tol",
    "mc_trials",
    "seed",
}


def load_scenario(path) -> Scenario:
    """Parse a scenario INI file.

    Sections: ``[system]`` (array and frame parameters), ``[users]``
    (either a generation recipe via seed/count/d_min_m/d_max_m, or
    explicit ``user1 = distance elevation azimuth`` lines), and an
    optional ``[hyper]`` for solver settings.  Powers are given in dBm,
    lengths in meters.  Malformed input raises `ScenarioError` naming
    the offending section and key.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ScenarioError(f"scenario parse error in {path}: {exc}") from None

    for section in parser.sections():
        if section not in ("system", "users", "hyper"):
            raise ScenarioError(f"unknown section [{section}]")
    if not parser.has_section("system") or not parser.has_section("users"):
        raise ScenarioError("scenario file needs [system] and [users] sections")

    sys_sec = parser["system"]
    for key in sys_sec:
        if key not in _SYSTEM_KEYS:
            raise ScenarioError(f"unknown key in [system]: {key}")
    for key in ("m_antennas", "k_users", "wavelength_m", "region_size_m",
                "tx_power_dbm", "noise_power_dbm", "coherence_len"):
        if key not in sys_sec:
            raise ScenarioError(f"missing key in [system]: {key}")

    def _num(sec, key, conv, default=None):
        try:
            raw = parser.get(sec, key, fallback=None)
            if raw is None:
                return default
            return conv(raw)
        except ValueError:
            raise ScenarioError(
                f"bad value for {key} in [{sec}]: {parser.get(sec, key)!r}"
            ) from None

    m_antennas = _num("system", "m_antennas", int)
    k_users = _num("system", "k_users", int)
    wavelength = _num("system", "wavelength_m", float)
    region_size = _num("system", "region_size_m", float)
    d_min = _num("system", "d_min_m", float, wavelength / 2.0)
    tx_power = dbm_to_watt(_num("system", "tx_power_dbm", float))
    noise_power = dbm_to_watt(_num("system", "noise_power_dbm", float))
    coherence_len = _num("system", "coherence_len", int)
    pilot_len = _num("system", "pilot_len", int, k_users)

    usr_sec = parser["users"]
    explicit = sorted(k for k in usr_sec if k.startswith("user"))
    for key in usr_sec:
        if key not in _USER_SHARED_KEYS and key not in explicit:
            raise ScenarioError(f"unknown key in [users]: {key}")
    if "rician" in usr_sec and "rician_db" in usr_sec:
        raise ScenarioError("[users] sets both rician and rician_db")
    if "rician_db" in usr_sec:
        rician = db_to_linear(_num("users", "rician_db", float))
    else:
        rician = _num("users", "rician", float, 6.0)
    path_loss_ref = db_to_linear(_num("users", "path_loss_ref_db", float, -40.0))
    path_loss_exp = _num("users", "path_loss_exp", float, 2.8)
    noise_over_taup = noise_power / (pilot_len * tx_power)

    user_model = None
    if explicit:
        expected = [f"user{i + 1}" for i in range(len(explicit))]
        if explicit != expected:
            raise ScenarioError(
                f"[users] entries must be user1..user{len(explicit)}, got {explicit}"
            )
        users = []
        for key in expected:
            parts = usr_sec[key].split()
            if len(parts) != 3:
                raise ScenarioError(
                    f"[users] {key} needs 'distance elevation azimuth', "
                    f"got {usr_sec[key]!r}"
                )
            try:
                dist, elev, azim = (float(p) for p in parts)
            except ValueError:
                raise ScenarioError(f"bad number in [users] {key}") from None
            users.append(
                derive_user(
                    dist,
                    elev,
                    azim,
                    noise_over_taup=noise_over_taup,
                    rician=rician,
                    path_loss_ref=path_loss_ref,
                    path_loss_exp=path_loss_exp,
                )
            )
        users = tuple(users)
    else:
        for key in ("seed", "count"):
            if key not in usr_sec:
                raise ScenarioError(f"missing key in [users]: {key}")
        seed = _num("users", "seed", int)
        count = _num("users", "count", int)
        d_lo = _num("users", "d_min_m", float, 50.0)
        d_hi = _num("users", "d_max_m", float, 70.0)
        user_model = UserModel(
            seed, count, (d_lo, d_hi), rician, path_loss_ref, path_loss_exp
        )
        users = random_users(
            seed,
            count,
            noise_over_taup=noise_over_taup,
            d_range=(d_lo, d_hi),
            rician=rician,
            path_loss_ref=path_loss_ref,
            path_loss_exp=path_loss_exp,
        )

    hyper = HyperParams()
    if parser.has_section("hyper"):
        hyp_sec = parser["hyper"]
        for key in hyp_sec:
            if key not in _HYPER_KEYS:
                raise ScenarioError(f"unknown key in [hyper]: {key}")
        kwargs = {}
        for key, conv in (
            ("mu", float), ("omega", float), ("kappa", float), ("varpi", float),
            ("ga_pop", int), ("ga_max_iter", int), ("grad_max_iter", int),
            ("grad_tol", float), ("mc_trials", int), ("seed", int),
        ):
            if key in hyp_sec:
                kwargs[key] = _num("hyper", key, conv)
        hyper = HyperParams(**kwargs)

    scn = Scenario(
        m_antennas=m_antennas,
        k_users=k_users,
        wavelength=wavelength,
        region_size=region_size,
        d_min=d_min,
        tx_power=tx_power,
        noise_power=noise_power,
        coherence_len=coherence_len,
        pilot_len=pilot_len,
        users=users,
        hyper=hyper,
        user_model=user_model,
    )
    return validate_scenario(scn)
