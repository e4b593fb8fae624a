"""Flat key = value scenario configuration.

One setting per line, ``#`` starts a comment. Unknown keys, malformed values
and physically invalid parameters raise :class:`ConfigError` carrying the
offending line number. Rates (omega_m, gamma, kappa, detunings, band and
frequency-grid edges, and a numeric coupling) are read in the unit named by
``frequency_unit`` and stored in rad/s.

Keys
----
detector:    m, omega_m, gamma, kappa, T, t_d, L
coupling:    coupling = opt | <G in (rad/s)/m>;  position_tau (s) for the position meter
detuning:    delta, omega_sig, delta_prime (number | matched), kappa_prime, g_ratio
signal:      signal = impulse | flyby | gravitational
             impulse: delta_p (kg m/s) or delta_p_kev, t0
             flyby: beta, b, v;  gravitational: m_chi, b, v (source mass = m)
band:        band = lo:hi
grid:        nu_min, nu_max, points_per_decade, spike_points_per_decade, variants
sweep:       taus (comma list) or tau_min, tau_max, n_tau
misc:        frequency_unit = rad_s | hz, output, seed
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import convert_momentum
from .response import REFERENCE, DetectorParams

RATE_KEYS = {"omega_m", "gamma", "kappa", "delta", "omega_sig", "delta_prime", "kappa_prime",
             "nu_min", "nu_max", "coupling"}
FLOAT_KEYS = {"m", "omega_m", "gamma", "kappa", "T", "t_d", "L", "position_tau", "delta", "omega_sig",
              "kappa_prime", "g_ratio", "delta_p", "delta_p_kev", "t0", "beta", "b", "v", "m_chi",
              "nu_min", "nu_max", "tau_min", "tau_max"}
INT_KEYS = {"points_per_decade", "spike_points_per_decade", "n_tau", "seed"}
OTHER_KEYS = {"coupling", "delta_prime", "signal", "band", "variants", "taus", "frequency_unit", "output"}
KNOWN_KEYS = FLOAT_KEYS | INT_KEYS | OTHER_KEYS
VARIANTS = ("position", "velocity", "position_detuned", "velocity_detuned")
TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class ScenarioConfig:
    """Resolved settings; all rates in rad/s."""

    detector: DetectorParams = REFERENCE
    coupling: str | float = "opt"
    position_tau: float = 1e-6
    detuning: dict | None = None  # delta, omega_sig, delta_prime, kappa_prime, g_ratio
    signal: dict = field(default_factory=lambda: {"kind": "impulse", "delta_p": convert_momentum(10.0), "t0": 0.0})
    band: tuple[float, float] | None = None
    output_path: str | None = None
    frequency_unit: str = "rad_s"
    nu_min: float = 0.1
    nu_max: float = 1e8
    points_per_decade: int = 50
    spike_points_per_decade: int = 400
    variants: tuple[str, ...] = ("position", "velocity")
    taus: tuple[float, ...] = ()
    seed: int = 0

    def to_text(self) -> str:
        """Serialise in rad/s; parsing the result gives an equal config."""
        d = self.detector
        lines = [f"{k} = {getattr(d, k)!r}" for k in ("m", "omega_m", "gamma", "kappa", "T", "t_d", "L")]
        lines.append(f"coupling = {self.coupling!r}" if not isinstance(self.coupling, str) else f"coupling = {self.coupling}")
        lines.append(f"position_tau = {self.position_tau!r}")
        if self.detuning is not None:
            for k, v in self.detuning.items():
                if v is not None:
                    lines.append(f"{k} = {v}" if isinstance(v, str) else f"{k} = {v!r}")
        lines.append(f"signal = {self.signal['kind']}")
        for k, v in self.signal.items():
            if k != "kind":
                lines.append(f"{k} = {v!r}")
        if self.band is not None:
            lines.append(f"band = {self.band[0]!r}:{self.band[1]!r}")
        if self.output_path is not None:
            lines.append(f"output = {self.output_path}")
        lines.append("frequency_unit = rad_s")
        lines += [f"nu_min = {self.nu_min!r}", f"nu_max = {self.nu_max!r}",
                  f"points_per_decade = {self.points_per_decade}",
                  f"spike_points_per_decade = {self.spike_points_per_decade}",
                  f"variants = {','.join(self.variants)}"]
        if self.taus:
            lines.append("taus = " + ",".join(repr(t) for t in self.taus))
        lines.append(f"seed = {self.seed}")
        return "\n".join(lines) + "\n"

    def as_json(self) -> str:
        d = dataclasses.asdict(self)
        d["detector"] = self.detector.as_dict()
        return json.dumps(d, sort_keys=True, default=float)


def _float(key, raw, line):
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}", line) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite", line)
    return value


def _int(key, raw, line):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}", line) from None


def parse_band(raw: str, line: int | None = None) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise ConfigError(f"band must look like LO:HI, got {raw!r}", line)
    lo = _float("band", parts[0], line)
    hi = float(parts[1]) if parts[1].strip() in ("inf", "+inf") else _float("band", parts[1], line)
    if lo < 0:
        raise ConfigError("band lower edge must be >= 0", line)
    return lo, hi


def read_pairs(text: str) -> list[tuple[int, str, str]]:
    pairs = []
    seen = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"expected key = value, got {s!r}", n)
        key, value = (t.strip() for t in s.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", n)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", n)
        seen[key] = n
        pairs.append((n, key, value))
    return pairs


def parse_config(text: str, frequency_unit: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Parse config text. ``frequency_unit`` overrides the file's own setting."""
    pairs = read_pairs(text)
    if overrides:
        for k, v in overrides.items():
            if k not in KNOWN_KEYS:
                raise ConfigError(f"unknown override key {k!r}")
        keep = [(n, k, v) for n, k, v in pairs if k not in overrides]
        pairs = keep + [(None, k, str(v)) for k, v in overrides.items()]
    values = {k: (n, v) for n, k, v in pairs}
    unit = frequency_unit or values.get("frequency_unit", (None, "rad_s"))[1]
    if unit not in ("rad_s", "hz"):
        raise ConfigError(f"frequency_unit must be rad_s or hz, got {unit!r}", values.get("frequency_unit", (None,))[0])
    scale = TWO_PI if unit == "hz" else 1.0

    def num(key, default=None, rate=False):
        if key not in values:
            return default
        n, raw = values[key]
        v = _float(key, raw, n)
        return v * scale if rate else v

    cfg = ScenarioConfig(frequency_unit=unit)
    det = {}
    for k in ("m", "omega_m", "gamma", "kappa", "T", "t_d", "L"):
        det[k] = num(k, getattr(REFERENCE, k), rate=k in RATE_KEYS)
    try:
        cfg.detector = DetectorParams(**det)
    except ValueError as exc:
        line = min((values[k][0] for k in det if k in values and values[k][0] is not None), default=None)
        raise ConfigError(f"invalid detector: {exc}", line) from None

    if "coupling" in values:
        n, raw = values["coupling"]
        if raw == "opt":
            cfg.coupling = "opt"
        else:
            g = _float("coupling", raw, n) * scale
            if g < 0:
                raise ConfigError("coupling must be >= 0", n)
            cfg.coupling = g
    cfg.position_tau = num("position_tau", cfg.position_tau)
    if not cfg.position_tau > 0:
        raise ConfigError("position_tau must be > 0", values.get("position_tau", (None,))[0])

    if "delta" in values or "omega_sig" in values:
        det_cfg = {"delta": num("delta", 0.0, rate=True), "omega_sig": num("omega_sig", None, rate=True)}
        if det_cfg["omega_sig"] is None:
            raise ConfigError("detuning needs omega_sig", values.get("delta", (None,))[0])
        if "delta_prime" in values and values["delta_prime"][1] == "matched":
            det_cfg["delta_prime"] = "matched"
        else:
            det_cfg["delta_prime"] = num("delta_prime", 0.0, rate=True)
        det_cfg["kappa_prime"] = num("kappa_prime", None, rate=True)
        det_cfg["g_ratio"] = num("g_ratio", -1.0)
        cfg.detuning = det_cfg

    kind = values.get("signal", (None, "impulse"))[1]
    sn = values.get("signal", (None,))[0]
    if kind == "impulse":
        if "delta_p" in values and "delta_p_kev" in values:
            raise ConfigError("give delta_p or delta_p_kev, not both", values["delta_p_kev"][0])
        dp = num("delta_p")
        if dp is None:
            kev = num("delta_p_kev")
            dp = convert_momentum(kev) if kev is not None else convert_momentum(10.0)
        if dp < 0:
            raise ConfigError("delta_p must be >= 0", values.get("delta_p", (sn,))[0])
        cfg.signal = {"kind": "impulse", "delta_p": dp, "t0": num("t0", 0.0)}
    elif kind in ("flyby", "gravitational"):
        b, v = num("b", 1e-3), num("v", 2.2e5)
        if not (b > 0 and v > 0):
            raise ConfigError("flyby needs b > 0 and v > 0", values.get("b", values.get("v", (sn,)))[0])
        if kind == "flyby":
            beta = num("beta")
            if beta is None:
                raise ConfigError("flyby signal needs beta", sn)
            cfg.signal = {"kind": "flyby", "beta": beta, "b": b, "v": v}
        else:
            cfg.signal = {"kind": "gravitational", "m_chi": num("m_chi", 1e-5), "b": b, "v": v}
    else:
        raise ConfigError(f"unknown signal kind {kind!r}", sn)

    if "band" in values:
        n, raw = values["band"]
        lo, hi = parse_band(raw, n)
        cfg.band = (lo * scale, hi * scale)
    if "output" in values:
        cfg.output_path = values["output"][1]
    cfg.nu_min = num("nu_min", cfg.nu_min, rate=True)
    cfg.nu_max = num("nu_max", cfg.nu_max, rate=True)
    if not 0 < cfg.nu_min < cfg.nu_max:
        raise ConfigError("need 0 < nu_min < nu_max", values.get("nu_min", values.get("nu_max", (None,)))[0])
    for k in ("points_per_decade", "spike_points_per_decade", "seed", "n_tau"):
        if k in values:
            n, raw = values[k]
            v = _int(k, raw, n)
            if k != "seed" and v < 1:
                raise ConfigError(f"{k} must be >= 1", n)
            if k != "n_tau":
                setattr(cfg, k, v)
    if "variants" in values:
        n, raw = values["variants"]
        vs = tuple(s.strip() for s in raw.split(",") if s.strip())
        bad = [s for s in vs if s not in VARIANTS]
        if bad or not vs:
            raise ConfigError(f"variants must be drawn from {', '.join(VARIANTS)}", n)
        cfg.variants = vs
    if "taus" in values:
        n, raw = values["taus"]
        cfg.taus = tuple(_float("taus", s, n) for s in raw.split(",") if s.strip())
    elif "tau_min" in values or "tau_max" in values:
        lo, hi = num("tau_min", 1e-8), num("tau_max", 1e-2)
        count = _int("n_tau", values["n_tau"][1], values["n_tau"][0]) if "n_tau" in values else 30
        if not 0 < lo <= hi:
            raise ConfigError("need 0 < tau_min <= tau_max", values.get("tau_min", (None,))[0])
        cfg.taus = tuple(float(t) for t in np.geomspace(lo, hi, count))
    if any(not t > 0 for t in cfg.taus):
        raise ConfigError("taus must be > 0", values.get("taus", (None,))[0])
    return cfg


def load_config(path, frequency_unit: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, frequency_unit, overrides)
