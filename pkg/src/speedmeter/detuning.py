"""Detuned cavities: quadrature mixing, optimal-quadrature readout and phase matching.

The detuned single-sided cavity and the detuned double ring are linear
networks. They are solved numerically per frequency as small complex
systems A(nu) u = B(nu) w, where u collects the intracavity quadratures and
the displacement x, and w the input fields (vacuum quadratures, delay-line
loss ports, force). The readout is the quadrature Q = a X_out + b Y_out with
(a, b) the force-to-output transfers frozen at omega_sig. Mechanics enters in
second-order form chi_m^{-1}(nu) x = F_in + F_rad.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import HBAR
from .noise import NoisePsdBreakdown, g_opt_position, g_opt_velocity
from .response import DetectorParams, cavity_response, mechanical_response

COND_LIMIT = 1e12


class SingularSystemError(np.linalg.LinAlgError):
    """The frequency-domain system matrix is (numerically) singular."""


@dataclass(frozen=True)
class DetuningParams:
    """Detunings and second-cavity parameters; ``kappa_prime`` None means kappa."""

    delta: float
    omega_sig: float
    delta_prime: float = 0.0
    kappa_prime: float | None = None
    g_ratio: float = -1.0

    def __post_init__(self):
        for name in ("delta", "omega_sig", "delta_prime", "g_ratio"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.omega_sig > 0:
            raise ValueError("omega_sig must be > 0")
        if self.kappa_prime is not None and not (self.kappa_prime > 0 and math.isfinite(self.kappa_prime)):
            raise ValueError("kappa_prime must be > 0")

    def kappa2(self, p: DetectorParams) -> float:
        return p.kappa if self.kappa_prime is None else self.kappa_prime


@dataclass(frozen=True)
class QuadratureCoefficients:
    a: complex
    b: complex

    def __post_init__(self):
        if self.norm == 0:
            raise ValueError("a^2 + b^2 must be nonzero")

    @property
    def norm(self) -> complex:
        return self.a**2 + self.b**2


# -- single-sided closed forms ------------------------------------------------


def single_quadrature_closed_form(nu, p: DetectorParams, delta: float):
    """(a, b) of the detuned single-sided cavity from the explicit solution."""
    nu = np.asarray(nu, dtype=float)
    chi_c = cavity_response(nu, p.kappa)
    chi_m = mechanical_response(nu, p)
    denom = p.G**2 * HBAR * delta + (p.kappa / chi_c**2 + delta**2) / chi_m
    a = -p.G * delta * math.sqrt(p.kappa) / denom
    b = p.G * p.kappa / chi_c / denom
    return a, b


# -- linear network ---------------------------------------------------------


def _equilibrated_solve(A, B):
    # Ruiz equilibration so the condition estimate reflects the physics, not the units
    n, k, _ = A.shape
    r = np.ones((n, k, 1))
    c = np.ones((n, 1, k))
    A2 = A
    for _ in range(30):
        rr = 1.0 / np.sqrt(np.max(np.abs(A2), axis=2, keepdims=True))
        cc = 1.0 / np.sqrt(np.max(np.abs(A2), axis=1, keepdims=True))
        r, c = r * rr, c * cc
        A2 = A * r * c
        if np.all(np.abs(rr - 1) < 1e-3) and np.all(np.abs(cc - 1) < 1e-3):
            break
    cond = np.linalg.cond(A2)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        worst = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise SingularSystemError(f"system matrix condition {cond[worst]:.3g} exceeds {COND_LIMIT:g}")
    y = np.linalg.solve(A2, B * r)
    return y * np.swapaxes(c, 1, 2)


@dataclass
class _Network:
    """Stacked system A u = B w plus output maps out = C u + D w."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    force_row: np.ndarray  # (n, n_opt) radiation-pressure force from optical states
    n_opt: int  # optical states come first in u; the displacement x last
    f_index: int  # column of w holding F_in

    def transfers(self):
        """(n, 2, n_in) transfers from inputs to (X_out, Y_out).

        Block elimination: the optical block is solved first, which leaves
        one scalar equation chi_eff^{-1} x = F_in + F_open for the mechanics.
        """
        k = self.n_opt
        A_oo = self.A[:, :k, :k]
        A_ox = self.A[:, :k, k:]
        A_xo = self.A[:, k:, :k]
        A_xx = self.A[:, k:, k:]
        sol = _equilibrated_solve(A_oo, np.concatenate([self.B[:, :k, :], A_ox], axis=2))
        o_w, o_x = sol[:, :, :-1], sol[:, :, -1:]
        spring = A_xo @ o_x
        chi_inv = A_xx - spring
        scale = np.maximum(np.abs(A_xx), np.abs(spring))
        if np.any(np.abs(chi_inv) <= 1e-12 * scale):
            raise SingularSystemError("effective mechanical susceptibility is singular")
        x = (self.B[:, k:, :] - A_xo @ o_w) / chi_inv
        u = np.concatenate([o_w - o_x @ x, x], axis=1)
        return self.C @ u + self.D

    def clamped(self):
        """Output transfers and open-loop radiation force with x held at zero."""
        k = self.n_opt
        o = _equilibrated_solve(self.A[:, :k, :k], self.B[:, :k, :])
        out = self.C[:, :, :k] @ o + self.D
        force = np.einsum("nk,nkj->nj", self.force_row, o)
        return out, force


def _inverse_chi_m(nu, p: DetectorParams):
    return -p.m * (nu**2 - p.omega_m**2 + 1j * p.gamma * nu)


def _single_network(nu, p: DetectorParams, delta: float) -> _Network:
    n = nu.size
    s = -1j * nu
    k = p.kappa
    sk = math.sqrt(k)
    # u = [X, Y, x], w = [X_in, Y_in, F]; mechanics as chi_m^{-1} x = F_total
    A = np.zeros((n, 3, 3), complex)
    B = np.zeros((n, 3, 3), complex)
    A[:, 0, 0] = s + k / 2
    A[:, 0, 1] = delta
    A[:, 1, 0] = -delta
    A[:, 1, 1] = s + k / 2
    A[:, 1, 2] = p.G
    A[:, 2, 2] = _inverse_chi_m(nu, p)
    A[:, 2, 0] = HBAR * p.G
    B[:, 0, 0] = sk
    B[:, 1, 1] = sk
    B[:, 2, 2] = 1.0
    C = np.zeros((n, 2, 3), complex)
    D = np.zeros((n, 2, 3), complex)
    C[:, 0, 0] = -sk
    C[:, 1, 1] = -sk
    D[:, 0, 0] = 1.0
    D[:, 1, 1] = 1.0
    force = np.zeros((n, 2), complex)
    force[:, 0] = -HBAR * p.G
    return _Network(A, B, C, D, force, 2, 2)


def theta_factor(p: DetectorParams, d: DetuningParams) -> complex:
    """e^{i theta}, the relative quadrature rotation of the second cavity's coupling."""
    k2 = d.kappa2(p)
    r1 = d.delta**2 + p.kappa**2 / 4
    r2 = d.delta_prime**2 + k2**2 / 4
    return (-1j * d.delta - p.kappa / 2) / (-1j * d.delta_prime + k2 / 2) * math.sqrt(r2 / r1)


def second_coupling(p: DetectorParams, d: DetuningParams) -> float:
    """G' = -g_ratio G sqrt(1-L) sqrt(kappa'/kappa) sqrt((Delta^2+kappa^2/4)/(Delta'^2+kappa'^2/4))."""
    k2 = d.kappa2(p)
    r1 = d.delta**2 + p.kappa**2 / 4
    r2 = d.delta_prime**2 + k2**2 / 4
    return -d.g_ratio * p.G * math.sqrt(1 - p.L) * math.sqrt(k2 / p.kappa) * math.sqrt(r1 / r2)


def _double_network(nu, p: DetectorParams, d: DetuningParams) -> _Network:
    n = nu.size
    s = -1j * nu
    k, k2 = p.kappa, d.kappa2(p)
    sk, sk2 = math.sqrt(k), math.sqrt(k2)
    ls, ll = math.sqrt(1 - p.L), math.sqrt(p.L)
    e = np.exp(1j * nu * p.t_d)
    eth = theta_factor(p, d)
    cth, sth = eth.real, eth.imag
    g2 = second_coupling(p, d)
    delta, delta2 = d.delta, d.delta_prime
    # u = [X, Y, X', Y', x], w = [X_in, Y_in, Xl_in, Yl_in, F]
    A = np.zeros((n, 5, 5), complex)
    B = np.zeros((n, 5, 5), complex)
    A[:, 0, 0] = s + k / 2
    A[:, 0, 1] = delta
    A[:, 1, 0] = -delta
    A[:, 1, 1] = s + k / 2
    A[:, 1, 4] = p.G
    # second cavity driven by the delayed, attenuated first-cavity output
    A[:, 2, 2] = s + k2 / 2
    A[:, 2, 3] = delta2
    A[:, 2, 4] = g2 * sth
    A[:, 2, 0] = sk2 * ls * e * sk
    A[:, 3, 3] = s + k2 / 2
    A[:, 3, 2] = -delta2
    A[:, 3, 4] = -g2 * cth
    A[:, 3, 1] = sk2 * ls * e * sk
    A[:, 4, 4] = _inverse_chi_m(nu, p)
    A[:, 4, 0] = HBAR * p.G
    A[:, 4, 2] = -HBAR * g2 * cth
    A[:, 4, 3] = -HBAR * g2 * sth
    B[:, 0, 0] = sk
    B[:, 1, 1] = sk
    B[:, 2, 0] = sk2 * ls * e
    B[:, 2, 2] = sk2 * ll
    B[:, 3, 1] = sk2 * ls * e
    B[:, 3, 3] = sk2 * ll
    B[:, 4, 4] = 1.0
    # second-cavity output: X'_out = X'_in - sqrt(kappa') X'
    C = np.zeros((n, 2, 5), complex)
    D = np.zeros((n, 2, 5), complex)
    C[:, 0, 0] = -ls * e * sk
    C[:, 0, 2] = -sk2
    C[:, 1, 1] = -ls * e * sk
    C[:, 1, 3] = -sk2
    D[:, 0, 0] = ls * e
    D[:, 0, 2] = ll
    D[:, 1, 1] = ls * e
    D[:, 1, 3] = ll
    force = np.zeros((n, 4), complex)
    force[:, 0] = -HBAR * p.G
    force[:, 2] = HBAR * g2 * cth
    force[:, 3] = HBAR * g2 * sth
    return _Network(A, B, C, D, force, 4, 4)


# -- readout and PSD --------------------------------------------------------


def _coefficients(build, omega_sig: float) -> QuadratureCoefficients:
    net = build(np.array([omega_sig]))
    h = net.transfers()[0, :, net.f_index]
    return QuadratureCoefficients(complex(h[0]), complex(h[1]))


def _readout_psd(build, nu, p: DetectorParams, coeffs: QuadratureCoefficients) -> NoisePsdBreakdown:
    nu = np.asarray(nu, dtype=float)
    shape = nu.shape
    # negative frequencies: H(-nu) = conj(H(nu)) with conjugated coefficients, so |nu| suffices
    flat = np.abs(nu.ravel())
    net = build(flat)
    h = net.transfers()
    w = np.array([coeffs.a, coeffs.b])
    hq = np.einsum("i,nij->nj", w, h)  # (n, n_in)
    t_f = hq[:, net.f_index]
    if np.any(np.abs(t_f) == 0):
        raise SingularSystemError("readout quadrature carries no force signal at some frequency")
    d_out, f_open = net.clamped()
    dq = np.einsum("i,nij->nj", w, d_out)
    noise_cols = [j for j in range(h.shape[2]) if j != net.f_index]
    shot_amp = dq[:, noise_cols] / t_f[:, None]
    ba_amp = f_open[:, noise_cols]
    shot = np.sum(np.abs(shot_amp) ** 2, axis=1)
    backaction = np.sum(np.abs(ba_amp) ** 2, axis=1)
    corr = 2.0 * np.sum((np.conj(shot_amp) * ba_amp).real, axis=1)
    thermal = np.full_like(shot, p.n_bm)
    return NoisePsdBreakdown(
        shot.reshape(shape), thermal.reshape(shape), backaction.reshape(shape), corr.reshape(shape)
    )


def single_coefficients(p: DetectorParams, d: DetuningParams) -> QuadratureCoefficients:
    return _coefficients(lambda x: _single_network(x, p, d.delta), d.omega_sig)


def double_coefficients(p: DetectorParams, d: DetuningParams) -> QuadratureCoefficients:
    return _coefficients(lambda x: _double_network(x, p, d), d.omega_sig)


def detuned_single_psd(nu, p: DetectorParams, d: DetuningParams) -> NoisePsdBreakdown:
    """Force PSD of the detuned single-sided cavity read out in Q = a X_out + b Y_out.

    a, b are frozen at omega_sig; the estimator divides Q by its actual
    force transfer, which equals a^2 + b^2 at omega_sig.
    """
    build = lambda x: _single_network(x, p, d.delta)  # noqa: E731
    return _readout_psd(build, nu, p, _coefficients(build, d.omega_sig))


def detuned_double_psd(nu, p: DetectorParams, d: DetuningParams) -> NoisePsdBreakdown:
    """Force PSD of the detuned double ring, optimal quadrature of the second output."""
    build = lambda x: _double_network(x, p, d)  # noqa: E731
    return _readout_psd(build, nu, p, _coefficients(build, d.omega_sig))


def quadrature_signal_transfers(nu, p: DetectorParams, d: DetuningParams, topology: str = "single"):
    """Force transfer into Q and P = b X_out - a Y_out with frozen coefficients.

    Returns (coeffs, t_q, t_p) where t_q(omega_sig) = a^2 + b^2 and
    t_p(omega_sig) = 0.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if topology == "single":
        build = lambda x: _single_network(x, p, d.delta)  # noqa: E731
    elif topology == "double":
        build = lambda x: _double_network(x, p, d)  # noqa: E731
    else:
        raise ValueError(f"unknown topology {topology!r}")
    c = _coefficients(build, d.omega_sig)
    net = build(nu)
    h = net.transfers()[:, :, net.f_index]
    t_q = c.a * h[:, 0] + c.b * h[:, 1]
    t_p = c.b * h[:, 0] - c.a * h[:, 1]
    return c, t_q, t_p


# -- coupling optimisation and phase matching ------------------------------


def optimize_g_detuned(p: DetectorParams, d: DetuningParams, topology: str = "single",
                       span_decades: float = 4.0, rtol: float = 1e-6) -> float:
    """Coupling minimising the measurement-added noise at omega_sig (bounded search in log G)."""
    if topology == "single":
        g_ref = g_opt_position(p, 1.0 / d.omega_sig)
        psd = detuned_single_psd
    elif topology == "double":
        g_ref = g_opt_velocity(p)
        psd = detuned_double_psd
    else:
        raise ValueError(f"unknown topology {topology!r}")
    w = np.array([d.omega_sig])

    def added(log_g):
        q = p.replace(G=g_ref * 10.0**log_g)
        br = psd(w, q, d)
        return float(np.log(br.total[0] - br.thermal[0]))

    res = minimize_scalar(added, bounds=(-span_decades, span_decades), method="bounded",
                          options={"xatol": rtol / math.log(10.0)})
    if abs(abs(res.x) - span_decades) < 1e-3:
        raise RuntimeError("optimal coupling sits at the search boundary")
    return g_ref * 10.0**res.x


def equal_power_coupling(g_resonant: float, delta: float, kappa: float) -> float:
    """Detuned coupling with |G|^2 / (Delta^2 + kappa^2/4) equal to the resonant value."""
    return g_resonant * math.sqrt((delta**2 + kappa**2 / 4) / (kappa**2 / 4))


def matching_condition(p: DetectorParams, d: DetuningParams) -> float:
    """(Delta'^2 + kappa'^2/4)/(Delta^2 + kappa^2/4) + g_ratio kappa'/kappa; zero when matched."""
    k2 = d.kappa2(p)
    return (d.delta_prime**2 + k2**2 / 4) / (d.delta**2 + p.kappa**2 / 4) + d.g_ratio * k2 / p.kappa


def matched_delta_prime(p: DetectorParams, d: DetuningParams, sign: float = 1.0) -> float:
    """Delta' that zeroes the matching residual for the other parameters held fixed."""
    k2 = d.kappa2(p)
    target = -d.g_ratio * k2 / p.kappa * (d.delta**2 + p.kappa**2 / 4) - k2**2 / 4
    if target < 0:
        raise ValueError("no real Delta' satisfies the matching condition")
    return math.copysign(math.sqrt(target), sign)


def cavity_phase(delta_eff, kappa):
    """Reflection phase factor (-i Delta_eff - kappa/2)/(-i Delta_eff + kappa/2)."""
    return (-1j * delta_eff - kappa / 2) / (-1j * delta_eff + kappa / 2)


def phase_derivatives(p: DetectorParams, d: DetuningParams, g0_over_x0: float = 1.0,
                      step: float | None = None) -> tuple[float, float]:
    """Central finite differences of phi_1 + phi_2 and of phi_1 alone in x, at x = 0.

    Delta_eff = Delta - g0 x / x0 and Delta'_eff = Delta' - g_ratio g0 x / x0.
    Phases are differenced through ratios of unit phasors, so branch cuts
    never enter.
    """
    k2 = d.kappa2(p)
    if step is None:
        step = 1e-4 * p.kappa / abs(g0_over_x0)

    def phasors(x):
        e1 = cavity_phase(d.delta - g0_over_x0 * x, p.kappa)
        e2 = cavity_phase(d.delta_prime - d.g_ratio * g0_over_x0 * x, k2)
        return e1, e1 * e2

    s1p, tp = phasors(step)
    s1m, tm = phasors(-step)
    d_single = cmath.phase(s1p / s1m) / (2 * step)
    d_total = cmath.phase(tp / tm) / (2 * step)
    return d_total, d_single


__all__ = [
    "DetuningParams",
    "QuadratureCoefficients",
    "SingularSystemError",
    "detuned_single_psd",
    "detuned_double_psd",
    "single_coefficients",
    "double_coefficients",
    "single_quadrature_closed_form",
    "quadrature_signal_transfers",
    "theta_factor",
    "second_coupling",
    "optimize_g_detuned",
    "equal_power_coupling",
    "matching_condition",
    "matched_delta_prime",
    "phase_derivatives",
    "cavity_phase",
]
