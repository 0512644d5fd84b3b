"""Two-color (omega + 2 omega) laser fields."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lattice import HBAR

KINDS = ("off", "gaussian", "plateau")


@dataclass(frozen=True)
class LaserPulse:
    """Field E(t) in V/A.

    ``omega`` is the photon energy of the fundamental in eV.  Gaussian pulses
    use ``t_center``/``t_width``; plateau pulses use ``t_on``/``t_off`` and
    the Gaussian edge width ``t_ramp``.
    """

    kind: str = "off"
    eps_w: float = 0.0
    eps_2w: float = 0.0
    omega: float = 1.0
    phi_w: float = 0.0
    phi_2w: float = 0.0
    t_center: float = 0.0
    t_width: float = 1.0
    t_on: float = 0.0
    t_off: float = 1.0
    t_ramp: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.eps_w < 0 or self.eps_2w < 0:
            raise ValueError("field amplitudes must be non-negative")
        if self.kind == "gaussian" and not self.t_width > 0:
            raise ValueError("t_width must be positive")
        if self.kind == "plateau" and not (self.t_on < self.t_off and self.t_ramp > 0):
            raise ValueError("plateau pulse needs t_on < t_off and t_ramp > 0")

    @property
    def relative_phase(self) -> float:
        return self.phi_2w - 2.0 * self.phi_w

    def with_relative_phase(self, phase: float) -> "LaserPulse":
        """Same pulse with phi_w = 0 and phi_2w = ``phase``."""
        return replace(self, phi_w=0.0, phi_2w=float(phase))

    def scaled(self, factor: float) -> "LaserPulse":
        return replace(self, eps_w=self.eps_w * factor, eps_2w=self.eps_2w * factor)


def envelope(pulse: LaserPulse, t):
    t = np.asarray(t, dtype=float)
    if pulse.kind == "off":
        return np.zeros_like(t)
    if pulse.kind == "gaussian":
        return np.exp(-((t - pulse.t_center) / pulse.t_width) ** 2)
    env = np.ones_like(t)
    early = t <= pulse.t_on
    late = t >= pulse.t_off
    env[early] = np.exp(-((t[early] - pulse.t_on) / pulse.t_ramp) ** 2)
    env[late] = np.exp(-((t[late] - pulse.t_off) / pulse.t_ramp) ** 2)
    return env


_PHASE_GRID = 2.0 ** 40  # phases are snapped to 2 pi / 2^40 so that phi and phi + 2 pi agree bit for bit


def canonical_phase(phi: float) -> float:
    """``phi`` reduced to [0, 2 pi) on a fine grid of turns."""
    steps = round(float(phi) / (2.0 * np.pi) * _PHASE_GRID) % int(_PHASE_GRID)
    return 2.0 * np.pi * (steps / _PHASE_GRID)


def field_value(pulse: LaserPulse, t):
    """E(t); accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=float)
    if pulse.kind == "off":
        out = np.zeros_like(t_arr)
    else:
        w = pulse.omega / HBAR
        carrier = (pulse.eps_w * np.cos(w * t_arr + canonical_phase(pulse.phi_w))
                   + pulse.eps_2w * np.cos(2.0 * w * t_arr + canonical_phase(pulse.phi_2w)))
        out = envelope(pulse, t_arr) * carrier
    return float(out) if np.ndim(t) == 0 else out


def field_extent(pulse: LaserPulse) -> float:
    """Time after which the envelope is below exp(-9)."""
    if pulse.kind == "gaussian":
        return pulse.t_center + 3.0 * pulse.t_width
    if pulse.kind == "plateau":
        return pulse.t_off + 3.0 * pulse.t_ramp
    return 0.0


# amplitude ratio eps_w / eps_2w shared by the f1-f4 pulses
_TABLE_RATIO = 2.82

_PRESETS = {
    "f1": dict(kind="gaussian", t_center=900.0, t_width=300.0, eps_2w=8.70e-3, eps_w=_TABLE_RATIO * 8.70e-3, omega=1.2),
    "f2": dict(kind="gaussian", t_center=900.0, t_width=300.0, eps_2w=4.00e-2, eps_w=_TABLE_RATIO * 4.00e-2, omega=1.2),
    "f3": dict(kind="gaussian", t_center=50.0, t_width=10.0, eps_2w=8.70e-3, eps_w=_TABLE_RATIO * 8.70e-3, omega=1.3),
    "f4": dict(kind="gaussian", t_center=50.0, t_width=10.0, eps_2w=4.00e-2, eps_w=_TABLE_RATIO * 4.00e-2, omega=1.3),
    "stark_plateau": dict(kind="plateau", t_on=300.0, t_off=700.0, t_ramp=100.0,
                          eps_2w=6.1e-3, eps_w=2 * 6.1e-3, omega=0.13),
    "stark_gaussian": dict(kind="gaussian", t_center=900.0, t_width=300.0,
                           eps_2w=8.7e-3, eps_w=2 * 8.7e-3, omega=0.3),
}

PRESET_LABELS = tuple(_PRESETS)


def preset(label: str, **overrides) -> LaserPulse:
    """Named pulse; phases default to zero and any field can be overridden.

    Frequencies of f1-f4 are sweep variables; the defaults are the values
    used for the single-frequency charge traces (1.2 eV for the 300 fs
    pulses, 1.3 eV for the 10 fs ones).
    """
    try:
        params = dict(_PRESETS[label])
    except KeyError:
        raise ValueError(f"unknown pulse preset {label!r}; choose from {PRESET_LABELS}") from None
    params.update(overrides)
    return LaserPulse(**params)


OFF = LaserPulse()
