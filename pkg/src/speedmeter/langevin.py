"""Time-domain Monte Carlo of the linearised optomechanical Langevin equations.

The resonant single-sided and double-ring systems are integrated with the
Euler-Maruyama scheme. Because the equations are feed-forward (amplitude
quadratures drive the mechanics, the mechanics drives the phase
quadratures), each Euler update is an IIR recursion and the whole
trajectory is produced by a short cascade of ``scipy.signal.lfilter`` calls,
which is the same arithmetic as the explicit loop, only vectorised.

White inputs are sampled with variance 1/dt (vacuum quadratures) and
N_BM/dt (thermal force), the discrete stand-ins for delta-correlated noise.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .constants import HBAR
from .noise import NoiseSpectrum, PositionNoise, VelocityNoise
from .response import DetectorParams, cavity_response, mechanical_response
from .signals import ImpulseSignal

RNG_ALGORITHM = "numpy PCG64 seeded by SeedSequence([seed, trajectory])"
MAX_KAPPA_DT = 0.05
THREAD_ENV = "SPEEDMETER_MAX_THREADS"


class StabilityError(ValueError):
    """Time step too coarse for the explicit integrator."""


class StepBudgetError(ValueError):
    """Requested simulation exceeds the step budget."""


@dataclass(frozen=True)
class SimConfig:
    dt: float
    duration: float
    seed: int = 0
    topology: str = "single"  # "single" or "double"
    injected_signal: object = None  # ImpulseSignal or anything with .force(t)
    n_trajectories: int = 1
    burn_in: float = 0.0
    max_steps: int = 10**9
    keep_position: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if self.topology not in ("single", "double"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def n_burn(self) -> int:
        return int(round(self.burn_in / self.dt))


@dataclass
class TimeTrace:
    """Recorded output quadrature (Y_out or Y'_out) after burn-in."""

    samples: np.ndarray
    dt: float
    params: DetectorParams  # with t_d snapped to the time grid
    metadata: dict = field(default_factory=dict)
    position: np.ndarray | None = None

    @property
    def duration(self) -> float:
        return self.samples.size * self.dt

    def to_csv(self, path) -> None:
        """Write the trace with a commented header holding parameters and seed."""
        import json

        header = "# " + json.dumps({"dt": self.dt, "duration": self.duration, "params": self.params.as_dict(), **self.metadata}, sort_keys=True)
        t = np.arange(self.samples.size) * self.dt
        with open(path, "w") as fh:
            fh.write(header + "\n")
            fh.write("t_s,y_out\n")
            np.savetxt(fh, np.column_stack([t, self.samples]), delimiter=",", fmt="%.17g")


@dataclass
class SpectralEstimate:
    frequencies: np.ndarray  # rad/s, strictly increasing
    psd: np.ndarray  # two-sided, our normalisation
    ci95: np.ndarray  # half-width of the 95% interval of the segment mean
    n_segments: int
    flagged: np.ndarray | None = None  # bins excluded because the transfer vanishes

    def band(self, lo: float, hi: float) -> "SpectralEstimate":
        sel = (self.frequencies >= lo) & (self.frequencies <= hi)
        if self.flagged is not None:
            sel &= ~self.flagged
        return SpectralEstimate(self.frequencies[sel], self.psd[sel], self.ci95[sel], self.n_segments)


# -- simulation -----------------------------------------------------------


def snap_delay(t_d: float, dt: float) -> tuple[int, float]:
    """Number of delay samples and the snapped delay time."""
    n = int(round(t_d / dt))
    if n < 1:
        raise ValueError(f"delay t_d = {t_d} is shorter than one time step {dt}")
    return n, n * dt


def _check(p: DetectorParams, cfg: SimConfig):
    if p.kappa * cfg.dt > MAX_KAPPA_DT:
        raise StabilityError(f"kappa dt = {p.kappa * cfg.dt:.3g} exceeds {MAX_KAPPA_DT}")
    # explicit Euler on the oscillator needs gamma dt >= omega_m^2 dt^2 to not grow
    if (p.omega_m * cfg.dt) ** 2 > p.gamma * cfg.dt and p.omega_m > 0:
        raise StabilityError("omega_m^2 dt > gamma: explicit oscillator update would grow")
    total = (cfg.n_steps + cfg.n_burn) * cfg.n_trajectories
    if total > cfg.max_steps:
        raise StepBudgetError(f"{total} steps exceed the budget of {cfg.max_steps}")


def _cavity(drive, kappa, dt):
    """Euler update X[n+1] = (1 - kappa dt / 2) X[n] + dt drive[n]."""
    return sps.lfilter([0.0, dt], [1.0, -(1.0 - 0.5 * kappa * dt)], drive)


def _mechanics(force, p: DetectorParams, dt):
    """Euler update of (p, x), eliminated to a two-step recursion for x."""
    a1 = -(2.0 - p.gamma * dt)
    a2 = 1.0 - p.gamma * dt + (p.omega_m * dt) ** 2
    return sps.lfilter([0.0, 0.0, dt * dt / p.m], [1.0, a1, a2], force)


def _delayed(series, n_delay, fresh):
    # samples before the line has filled are taken as vacuum
    return np.concatenate([fresh[:n_delay], series[:-n_delay]])


def _force_record(p: DetectorParams, cfg: SimConfig, rng, n: int, t_event: float | None):
    f = rng.standard_normal(n) * math.sqrt(p.n_bm / cfg.dt) if p.n_bm > 0 else np.zeros(n)
    sig = cfg.injected_signal
    if sig is not None and t_event is not None:
        if isinstance(sig, ImpulseSignal):
            k = int(round(t_event / cfg.dt))
            f[k] += sig.delta_p / cfg.dt
        else:
            t = np.arange(n) * cfg.dt - t_event
            f = f + sig.force(t)
    return f


def simulate_arrays(p: DetectorParams, cfg: SimConfig, trajectory: int = 0, t_event: float | None = None):
    """One trajectory; returns (y_out, x) over burn-in plus record."""
    _check(p, cfg)
    n = cfg.n_steps + cfg.n_burn
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, trajectory])))
    dt, k = cfg.dt, p.kappa
    sk = math.sqrt(k)
    x_in = rng.standard_normal(n) / math.sqrt(dt)
    y_in = rng.standard_normal(n) / math.sqrt(dt)
    force = _force_record(p, cfg, rng, n, t_event)
    X = _cavity(sk * x_in, k, dt)
    if cfg.topology == "single":
        x = _mechanics(force - HBAR * p.G * X, p, dt)
        Y = _cavity(sk * y_in - p.G * x, k, dt)
        return y_in - sk * Y, x
    n_delay, _ = snap_delay(p.t_d, dt)
    ls, ll = math.sqrt(1.0 - p.L), math.sqrt(p.L)
    g2 = -ls * p.G  # second-cavity coupling
    xl = rng.standard_normal(n) / math.sqrt(dt)
    yl = rng.standard_normal(n) / math.sqrt(dt)
    fill_x = rng.standard_normal(n_delay) / math.sqrt(dt)
    fill_y = rng.standard_normal(n_delay) / math.sqrt(dt)
    x_in2 = ls * _delayed(x_in - sk * X, n_delay, fill_x) + ll * xl
    X2 = _cavity(sk * x_in2, k, dt)
    x = _mechanics(force - HBAR * p.G * X + HBAR * g2 * X2, p, dt)
    Y = _cavity(sk * y_in - p.G * x, k, dt)
    y_in2 = ls * _delayed(y_in - sk * Y, n_delay, fill_y) + ll * yl
    Y2 = _cavity(sk * y_in2 + g2 * x, k, dt)
    return y_in2 - sk * Y2, x


def simulate(p: DetectorParams, cfg: SimConfig, trajectory: int = 0, t_event: float | None = None) -> TimeTrace:
    """Integrate one trajectory and return the post-burn-in output trace.

    ``t_event`` (seconds after the end of burn-in) places the injected signal.
    """
    q = p
    meta = {"seed": cfg.seed, "trajectory": trajectory, "topology": cfg.topology, "rng": RNG_ALGORITHM}
    if cfg.topology == "double":
        n_delay, t_snap = snap_delay(p.t_d, cfg.dt)
        q = p.replace(t_d=t_snap)
        meta.update(delay_samples=n_delay, t_d_requested=p.t_d, t_d_snapped=t_snap)
    t_abs = None if t_event is None else t_event + cfg.n_burn * cfg.dt
    y, x = simulate_arrays(q, cfg, trajectory, t_abs)
    nb = cfg.n_burn
    return TimeTrace(y[nb:], cfg.dt, q, meta, x[nb:] if cfg.keep_position else None)


def simulate_reference_loop(p: DetectorParams, cfg: SimConfig, trajectory: int = 0):
    """Plain explicit Euler loop, single-sided only; used to check :func:`simulate_arrays`."""
    n = cfg.n_steps + cfg.n_burn
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, trajectory])))
    dt, k = cfg.dt, p.kappa
    sk = math.sqrt(k)
    x_in = rng.standard_normal(n) / math.sqrt(dt)
    y_in = rng.standard_normal(n) / math.sqrt(dt)
    force = _force_record(p, cfg, rng, n, None)
    X = Y = mom = pos = 0.0
    out = np.empty(n)
    for i in range(n):
        out[i] = y_in[i] - sk * Y
        dX = -0.5 * k * X + sk * x_in[i]
        dY = -p.G * pos - 0.5 * k * Y + sk * y_in[i]
        dp = -HBAR * p.G * X - p.m * p.omega_m**2 * pos - p.gamma * mom + force[i]
        dx = mom / p.m
        X, Y, mom, pos = X + dt * dX, Y + dt * dY, mom + dt * dp, pos + dt * dx
    return out


# -- spectral estimation --------------------------------------------------


def estimate_psd(samples, dt: float, nperseg: int, min_segments: int = 32) -> SpectralEstimate:
    """Hann-windowed, non-overlapping segment average of a real series.

    Returns the two-sided PSD in our normalisation (white noise of variance
    sigma^2 per sample gives sigma^2 dt) at positive angular frequencies.
    """
    samples = np.asarray(samples, dtype=float)
    n_seg = samples.size // nperseg
    if n_seg < min_segments:
        raise ValueError(f"only {n_seg} segments of {nperseg} samples; need >= {min_segments}")
    f, _, sxx = sps.spectrogram(
        samples[: n_seg * nperseg], fs=1.0 / dt, window="hann", nperseg=nperseg, noverlap=0,
        detrend=False, scaling="density", mode="psd",
    )
    # one-sided per-Hz density -> two-sided in our convention
    sxx = sxx[1:] / 2.0
    nu = 2.0 * math.pi * f[1:]
    mean = sxx.mean(axis=1)
    ci = 1.96 * sxx.std(axis=1, ddof=1) / math.sqrt(n_seg)
    return SpectralEstimate(nu, mean, ci, n_seg)


def force_transfer(nu, p: DetectorParams, topology: str):
    """Continuous transfer from F_in to the recorded output quadrature."""
    nu = np.asarray(nu, dtype=float)
    base = p.G * cavity_response(nu, p.kappa) * mechanical_response(nu, p)
    if topology == "single":
        return base
    phase = np.exp(1j * nu * p.t_d) * (1.0 - math.sqrt(p.kappa) * cavity_response(nu, p.kappa))
    return math.sqrt(1.0 - p.L) * base * (1.0 + phase)


def estimate_force_psd(trace: TimeTrace, p: DetectorParams | None = None, nperseg: int = 2**15,
                       min_segments: int = 32) -> SpectralEstimate:
    """Force-referred PSD: output PSD divided by |transfer|^2 bin by bin.

    Bins where the dimensionless delay factor |1 + e^{i psi}| drops below
    1e-14 are flagged and carry NaN.
    """
    q = trace.params if p is None else p
    topology = trace.metadata.get("topology", "single")
    est = estimate_psd(trace.samples, trace.dt, nperseg, min_segments)
    h2 = np.abs(force_transfer(est.frequencies, q, topology)) ** 2
    flagged = np.zeros(est.frequencies.size, dtype=bool)
    if topology == "double":
        phase = np.exp(1j * est.frequencies * q.t_d) * (1.0 - math.sqrt(q.kappa) * cavity_response(est.frequencies, q.kappa))
        flagged = np.abs(1.0 + phase) < 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        psd = np.where(flagged, np.nan, est.psd / h2)
        ci = np.where(flagged, np.nan, est.ci95 / h2)
    return SpectralEstimate(est.frequencies, psd, ci, est.n_segments, flagged)


def analytic_noise(p: DetectorParams, topology: str) -> NoiseSpectrum:
    return PositionNoise(p) if topology == "single" else VelocityNoise(p)


def compare_bands(est: SpectralEstimate, model, lo: float, hi: float, n_sub: int = 8):
    """Ratio of estimated to model PSD averaged over log-spaced sub-bands.

    Returns rows (nu_lo, nu_hi, ratio, ci_halfwidth_of_ratio).
    """
    edges = np.geomspace(lo, hi, n_sub + 1)
    rows = []
    for a, b in zip(edges[:-1], edges[1:]):
        sub = est.band(a, b)
        if sub.frequencies.size == 0:
            raise ValueError(f"no frequency bins in [{a:.4g}, {b:.4g}]; increase nperseg")
        ref = model(sub.frequencies)
        r = sub.psd / ref
        # bins of a Hann periodogram are correlated with their neighbours; count half of them
        n_eff = max(1.0, sub.frequencies.size / 2.0)
        ci = float(np.sqrt(np.mean((sub.ci95 / ref) ** 2) / n_eff))
        rows.append((float(a), float(b), float(np.mean(r)), ci))
    return rows


# -- Monte Carlo SNR ------------------------------------------------------


@dataclass
class SnrTrials:
    snr: float
    signal_mean: float
    null_mean: float
    null_std: float
    n_signal: int
    n_null: int
    outputs_signal: np.ndarray = field(repr=False, default=None)
    outputs_null: np.ndarray = field(repr=False, default=None)

    def __float__(self):
        return self.snr


def _max_workers() -> int:
    raw = os.environ.get(THREAD_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def filter_outputs(p: DetectorParams, cfg: SimConfig, filt, band, with_signal: bool, indices) -> np.ndarray:
    """Matched-filter observable for each trajectory in ``indices``.

    The record is Hann-windowed about its centre, where the event sits. The
    force estimate is formed per frequency bin and the observable is
    2 Re sum_{nu in band} f*(nu) F_E(nu) dnu, the Hermitian completion of
    \\int f* F_E dnu.
    """
    lo, hi = band
    n = cfg.n_steps
    dt = cfg.dt
    n_c = n // 2
    t_c = n_c * dt
    w = np.hanning(n)
    nu = 2.0 * math.pi * np.fft.rfftfreq(n, dt)
    sel = (nu >= lo) & (nu <= hi)
    nu_b = nu[sel]
    q = p
    if cfg.topology == "double":
        q = p.replace(t_d=snap_delay(p.t_d, dt)[1])
    inv_t = 1.0 / force_transfer(nu_b, q, cfg.topology)
    fconj = np.conj(filt(nu_b))
    dnu = 2.0 * math.pi / (n * dt)
    # unitary transform with e^{+i nu t}, time origin at the window centre
    phase = np.exp(-1j * nu_b * t_c) * dt / math.sqrt(2.0 * math.pi)

    def one(i):
        tr = simulate(p, cfg, trajectory=i, t_event=t_c if with_signal else None)
        spec = np.conj(np.fft.rfft(w * tr.samples))[sel] * phase
        return 2.0 * float(np.real(np.sum(fconj * spec * inv_t))) * dnu

    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(one, indices))
    else:
        vals = [one(i) for i in indices]
    return np.asarray(vals)


def run_snr_trials(p: DetectorParams, cfg: SimConfig, filt, band) -> SnrTrials:
    """Half the trajectories carry the injected signal at the record centre."""
    if cfg.n_trajectories < 2:
        raise ValueError("need at least two trajectories")
    half = cfg.n_trajectories // 2
    sig_idx = range(0, half)
    null_idx = range(half, cfg.n_trajectories)
    out_s = filter_outputs(p, cfg, filt, band, cfg.injected_signal is not None, sig_idx)
    out_n = filter_outputs(p, cfg, filt, band, False, null_idx)
    sd = float(np.std(out_n, ddof=1))
    if not sd > 0:
        raise ValueError("null trajectories have zero variance")
    snr = (float(np.mean(out_s)) - float(np.mean(out_n))) / sd
    return SnrTrials(snr, float(np.mean(out_s)), float(np.mean(out_n)), sd, len(sig_idx), len(null_idx), out_s, out_n)


def empirical_snr(p: DetectorParams, cfg: SimConfig, filt, band) -> float:
    """(mean with signal - mean without) / std without, over cfg.n_trajectories."""
    return run_snr_trials(p, cfg, filt, band).snr


def with_defaults(cfg: SimConfig, **changes) -> SimConfig:
    return dataclasses.replace(cfg, **changes)


__all__ = [
    "SimConfig",
    "TimeTrace",
    "SpectralEstimate",
    "SnrTrials",
    "StabilityError",
    "StepBudgetError",
    "RNG_ALGORITHM",
    "simulate",
    "simulate_arrays",
    "simulate_reference_loop",
    "snap_delay",
    "estimate_psd",
    "estimate_force_psd",
    "force_transfer",
    "analytic_noise",
    "compare_bands",
    "filter_outputs",
    "run_snr_trials",
    "empirical_snr",
]
