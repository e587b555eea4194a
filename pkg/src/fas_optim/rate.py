"""Uplink rate lower bound with MRC over LMMSE estimates.

Closed form
-----------
With Rician statistics the per-user SINR of the use-and-then-forget
bound depends on antenna positions only through the squared LoS
cross-correlations ``|hbar_k^H hbar_i|^2``.  Writing c, eps, a for the
per-user `nlos_power`, `rician`, `est_gain` and M for the array size:

    desired_k = (M c_k (eps_k + a_k))^2
    noise_k   =  M c_k (eps_k + a_k)
    leak_k    =  M^2 c^2 eps^2 + M c^2 eps + M a^2 c^2 eps
               + a^2 c^2 M (M + 1) + q M a^2 c eps + q a^2 c
               + 2 M^2 c^2 a eps - M^2 c^2 (eps + a)^2
    I_ki      =  c_k c_i eps_k eps_i |hbar_k^H hbar_i|^2
               + M c_k c_i eps_k + M a_k^2 c_k c_i eps_i + M a_k^2 c_k c_i
               + q M a_k^2 c_i eps_i + q a_k^2 c_i

with q the per-entry pilot noise variance (noise_over_taup), and

    SINR_k = p desired_k / (p leak_k + p sum_{i != k} I_ki
                            + noise_power * noise_k)

The achievable rate is ``prelog * log2(1 + SINR_k)``.

Monte Carlo
-----------
`mc_uatf_sinr` estimates the same four expectations by simulation,
running the full pilot and estimation chain per trial.  It shares no
algebra with the closed form beyond the channel model, so the two act
as independent checks on each other.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import channel, estimation
from .scenario import Scenario

MC_BATCH = 8192  # trials per simulation batch; part of the reproducibility key


class RunningStats:
    """Streaming mean and variance over the leading axis, mergeable.

    Batches merge exactly (Chan's update), so a fixed partition of the
    trial budget gives bit-identical results however batches are fed.
    Complex data is allowed; deviations are measured with |.|^2.
    """

    def __init__(self):
        self.count = 0
        self.mean = None
        self._m2 = None

    def update(self, batch: np.ndarray) -> "RunningStats":
        batch = np.asarray(batch)
        n = batch.shape[0]
        if n == 0:
            return self
        bmean = batch.mean(axis=0)
        bm2 = np.sum(np.abs(batch - bmean) ** 2, axis=0)
        if self.count == 0:
            self.count = n
            self.mean = bmean
            self._m2 = bm2
        else:
            total = self.count + n
            delta = bmean - self.mean
            self.mean = self.mean + delta * (n / total)
            self._m2 = self._m2 + bm2 + np.abs(delta) ** 2 * (self.count * n / total)
            self.count = total
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self._m2 = other.count, other.mean, other._m2
            return self
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / total)
        self._m2 = (
            self._m2
            + other._m2
            + np.abs(delta) ** 2 * (self.count * other.count / total)
        )
        self.count = total
        return self

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.full_like(np.asarray(self._m2, dtype=float), np.nan)
        return self._m2 / (self.count - 1)

    def sem(self) -> np.ndarray:
        """Standard error of the running mean."""
        return np.sqrt(self.variance / self.count)


@dataclass(frozen=True)
class ClosedFormContext:
    """Layout-independent pieces of the SINR, precomputed per scenario."""

    wavelength: float
    tx_power: float
    noise_power: float
    prelog: float
    dirs: np.ndarray        # (K, 2) user direction pairs
    e_signal: np.ndarray    # (K,)
    e_noise: np.ndarray     # (K,)
    e_leak: np.ndarray      # (K,)
    i_const: np.ndarray     # (K, K) layout-free interference, zero diagonal
    i_coupling: np.ndarray  # (K, K) weight on |hbar_k^H hbar_i|^2, zero diagonal


def closed_form_context(scn: Scenario) -> ClosedFormContext:
    m = scn.m_antennas
    c = np.array([u.nlos_power for u in scn.users])
    eps = np.array([u.rician for u in scn.users])
    a = np.array([u.est_gain for u in scn.users])
    q = scn.noise_over_taup

    e_noise = m * c * (eps + a)
    e_signal = e_noise**2
    e_leak = (
        m**2 * c**2 * eps**2
        + m * c**2 * eps
        + m * a**2 * c**2 * eps
        + a**2 * c**2 * m * (m + 1)
        + q * m * a**2 * c * eps
        + q * a**2 * c
        + 2 * m**2 * c**2 * a * eps
        - m**2 * c**2 * (eps + a) ** 2
    )

    ck, ci = c[:, None], c[None, :]
    ek, ei = eps[:, None], eps[None, :]
    ak = a[:, None]
    i_const = (
        m * ck * ci * ek
        + m * ak**2 * ck * ci * ei
        + m * ak**2 * ck * ci
        + q * m * ak**2 * ci * ei
        + q * ak**2 * ci
    )
    i_coupling = ck * ci * ek * ei
    off = 1.0 - np.eye(len(c))
    return ClosedFormContext(
        wavelength=scn.wavelength,
        tx_power=scn.tx_power,
        noise_power=scn.noise_power,
        prelog=scn.prelog,
        dirs=channel.user_directions(scn.users),
        e_signal=e_signal,
        e_noise=e_noise,
        e_leak=e_leak,
        i_const=i_const * off,
        i_coupling=i_coupling * off,
    )


def los_cross(ctx: ClosedFormContext, layouts: np.ndarray) -> np.ndarray:
    """Gram matrix of LoS responses, shape (..., K, K); diagonal equals M."""
    layouts = np.asarray(layouts, dtype=float)
    phase = 2.0 * np.pi / ctx.wavelength * np.einsum("kd,...dm->...km", ctx.dirs, layouts)
    steer = np.exp(1j * phase)
    return np.einsum("...km,...im->...ki", steer.conj(), steer)


def f_sq(layout: np.ndarray, users, wavelength: float) -> np.ndarray:
    """Squared LoS cross-correlations |hbar_k^H hbar_i|^2, shape (K, K)."""
    hbar = channel.los_matrix(layout, users, wavelength)
    gram = hbar.conj().T @ hbar
    return np.abs(gram) ** 2


def sinr_for(ctx: ClosedFormContext, layouts: np.ndarray) -> np.ndarray:
    """Closed-form SINR of every user for a batch of layouts, (..., K)."""
    fsq = np.abs(los_cross(ctx, layouts)) ** 2
    interf = np.sum(ctx.i_const + ctx.i_coupling * fsq, axis=-1)
    p = ctx.tx_power
    return p * ctx.e_signal / (p * ctx.e_leak + p * interf + ctx.noise_power * ctx.e_noise)


def rates_for(ctx: ClosedFormContext, layouts: np.ndarray) -> np.ndarray:
    """Per-user rate lower bound in bit/s/Hz for a batch of layouts."""
    return ctx.prelog * np.log2(1.0 + sinr_for(ctx, layouts))


@dataclass(frozen=True)
class RateReport:
    """Closed-form SINR ingredients, optionally completed to rates."""

    e_signal: np.ndarray        # (K,)
    e_leak: np.ndarray          # (K,)
    e_noise: np.ndarray         # (K,)
    interference: np.ndarray    # (K, K), zero diagonal
    f_sq: np.ndarray            # (K, K), diagonal M^2
    sinr: np.ndarray | None = None
    rate: np.ndarray | None = None
    min_rate: float | None = None


def closed_form_terms(layout: np.ndarray, scn: Scenario) -> RateReport:
    """Evaluate the four closed-form terms for one layout."""
    ctx = closed_form_context(scn)
    fsq = np.abs(los_cross(ctx, layout)) ** 2
    interference = ctx.i_const + ctx.i_coupling * fsq
    return RateReport(
        e_signal=ctx.e_signal,
        e_leak=ctx.e_leak,
        e_noise=ctx.e_noise,
        interference=interference,
        f_sq=fsq,
    )


def sinr_and_rate(report: RateReport, scn: Scenario) -> RateReport:
    """Fill in SINR, rate, and min rate on a term report."""
    p = scn.tx_power
    denom = (
        p * report.e_leak
        + p * report.interference.sum(axis=-1)
        + scn.noise_power * report.e_noise
    )
    sinr = p * report.e_signal / denom
    rate = scn.prelog * np.log2(1.0 + sinr)
    return dataclasses.replace(
        report, sinr=sinr, rate=rate, min_rate=float(rate.min())
    )


def rate_report(layout: np.ndarray, scn: Scenario) -> RateReport:
    """Closed-form terms and rates in one call."""
    return sinr_and_rate(closed_form_terms(layout, scn), scn)


def min_rate(layout: np.ndarray, scn: Scenario) -> float:
    """Smallest per-user rate of the layout under the closed-form bound."""
    return float(rates_for(closed_form_context(scn), np.asarray(layout)).min())


@dataclass(frozen=True)
class McEstimate:
    """Simulated values of the four SINR expectations with standard errors."""

    desired: np.ndarray   # (K,) |E{hhat^H h}|^2
    leak: np.ndarray      # (K,) var{hhat^H h}
    interf: np.ndarray    # (K,) sum_i E{|hhat_k^H h_i|^2}
    noise: np.ndarray     # (K,) E{||hhat_k||^2}
    trials: int
    se: dict[str, np.ndarray]


def mc_uatf_sinr(
    layout: np.ndarray, scn: Scenario, trials: int, seed=None
) -> McEstimate:
    """Estimate the SINR expectations by simulating the estimation chain.

    Each trial draws a fresh channel and pilot noise, runs despreading
    and LMMSE estimation, and accumulates the combiner statistics.
    Trials are processed in fixed batches of `MC_BATCH`; results are
    deterministic given `seed` (an int or a Generator).

    The leak term is the variance of ``z_k = hhat_k^H h_k``; its standard
    error comes from the influence function of the variance statistic,
    centered with a first-batch pilot mean.
    """
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(
        scn.hyper.seed if seed is None else seed
    )
    n_batches = -(-trials // MC_BATCH)
    streams = rng.spawn(n_batches)

    hbar = channel.los_matrix(layout, scn.users, scn.wavelength)
    pilots = estimation.make_pilots(scn.pilot_len, scn.k_users)

    s_z = RunningStats()       # complex cross term z_k
    s_zsq = RunningStats()     # |z_k|^2
    s_w = RunningStats()       # influence values for the leak variance
    s_int = RunningStats()
    s_noise = RunningStats()
    pilot_mean = None

    left = trials
    for stream in streams:
        b = min(MC_BATCH, left)
        left -= b
        h = channel.sample_channel(layout, scn.users, scn.wavelength, stream, trials=b)
        obs = estimation.observe_pilots(
            h, pilots, scn.tx_power, scn.noise_power, stream
        )
        hhat = estimation.lmmse_estimate(obs, scn.users, hbar)
        cross = np.einsum("bmk,bmi->bki", hhat.conj(), h)
        z = np.einsum("bkk->bk", cross)
        absq = np.abs(cross) ** 2
        interf = absq.sum(axis=-1) - np.abs(z) ** 2
        norms = np.sum(np.abs(hhat) ** 2, axis=1)

        if pilot_mean is None:
            pilot_mean = z.mean(axis=0)
        zsq = np.abs(z) ** 2
        s_z.update(z)
        s_zsq.update(zsq)
        s_w.update(zsq - 2.0 * np.real(pilot_mean.conj() * z))
        s_int.update(interf)
        s_noise.update(norms)

    mean_z = s_z.mean
    desired = np.abs(mean_z) ** 2
    leak = s_zsq.mean - desired
    se = {
        "desired": 2.0 * np.abs(mean_z) * s_z.sem(),
        "leak": s_w.sem(),
        "interf": s_int.sem(),
        "noise": s_noise.sem(),
    }
    return McEstimate(
        desired=desired,
        leak=leak,
        interf=s_int.mean,
        noise=s_noise.mean,
        trials=trials,
        se=se,
    )


def mc_sinr(est: McEstimate, scn: Scenario) -> np.ndarray:
    """SINR from simulated expectations, mirroring the closed-form ratio."""
    p = scn.tx_power
    return p * est.desired / (
        p * est.leak + p * est.interf + scn.noise_power * est.noise
    )


def mc_rates(est: McEstimate, scn: Scenario) -> np.ndarray:
    return scn.prelog * np.log2(1.0 + mc_sinr(est, scn))


@dataclass(frozen=True)
class LemmaReport:
    """Sampled checks of the Gaussian moment identities behind the bound."""

    m: int
    trials: int
    quartic_mean: float        # E ||htilde||^4
    quartic_expected: float    # M^2 + M
    quartic_se: float
    bilinear_abs: float        # |E{(u1^H htilde)(u2^H htilde)}|
    bilinear_se: float
    quad_diag_rel_err: float   # E{X A X^H} diagonal vs tr(A)
    quad_offdiag_sigmas: float # off-diagonal deviation from 0 in SEs
    ok: bool


def lemma_checks(m: int, trials: int, seed=0) -> LemmaReport:
    """Verify the moment identities used by the closed form, by sampling.

    Checks, for htilde with i.i.d. unit-variance circular entries:
    E ||htilde||^4 = M^2 + M, E{(u1^H htilde)(u2^H htilde)} = 0 for fixed
    unit vectors, and E{X A X^H} = tr(A) I for a fixed square A.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    rng = np.random.default_rng(seed)

    def unit(v):
        return v / np.linalg.norm(v)

    u1 = unit(channel.complex_normal(rng, m))
    u2 = unit(channel.complex_normal(rng, m))
    n_side = m + 2
    raw = channel.complex_normal(rng, (n_side, n_side))
    a_mat = (raw + raw.conj().T) / 2.0  # random Hermitian, real trace
    trace_a = float(np.trace(a_mat).real)

    s_quart = RunningStats()
    s_bilin = RunningStats()
    s_quad = RunningStats()
    streams = rng.spawn(-(-trials // MC_BATCH))
    left = trials
    for stream in streams:
        b = min(MC_BATCH, left)
        left -= b
        ht = channel.complex_normal(stream, (b, m))
        nsq = np.sum(np.abs(ht) ** 2, axis=1)
        s_quart.update(nsq**2)
        s_bilin.update((ht @ u1.conj()) * (ht @ u2.conj()))
        x = channel.complex_normal(stream, (b, m, n_side))
        s_quad.update(x @ a_mat @ x.conj().swapaxes(-1, -2))

    expected = float(m**2 + m)
    quad_mean = s_quad.mean
    quad_se = s_quad.sem()
    diag = np.abs(np.diagonal(quad_mean) - trace_a)
    diag_rel = float(diag.max() / np.abs(trace_a))
    off_mask = ~np.eye(m, dtype=bool)
    if m > 1:
        off_sig = float(
            (np.abs(quad_mean[off_mask]) / quad_se[off_mask]).max()
        )
    else:
        off_sig = 0.0
    quartic_mean = float(s_quart.mean)
    quartic_se = float(s_quart.sem())
    bilinear_abs = float(np.abs(s_bilin.mean))
    bilinear_se = float(s_bilin.sem())
    ok = (
        abs(quartic_mean - expected) <= 0.01 * expected
        and bilinear_abs <= 4.0 * bilinear_se
        and diag_rel <= 0.01
        and off_sig <= 4.0
    )
    return LemmaReport(
        m=m,
        trials=trials,
        quartic_mean=quartic_mean,
        quartic_expected=expected,
        quartic_se=quartic_se,
        bilinear_abs=bilinear_abs,
        bilinear_se=bilinear_se,
        quad_diag_rel_err=diag_rel,
        quad_offdiag_sigmas=off_sig,
        ok=ok,
    )
