"""Scenario configuration, file I/O and presets.

Scenario files are YAML documents with one mapping per section::

    carrier:
      frequency_hz: 1.9e+9
    array:
      n_active: 8
    ...

Every field of :class:`ScenarioConfig` round-trips through
:func:`save_scenario` / :func:`load_scenario`.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .exceptions import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


def _opt_float(value):
    return None if value is None else float(value)


def _opt_int(value):
    return None if value is None else int(value)


def _pair(value):
    lo, hi = value
    return (float(lo), float(hi))


def _bool(value):
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return bool(value)


def _phase_bits(value):
    if value is None or (isinstance(value, str) and value.lower() == "continuous"):
        return None
    return int(value)


def _f(default, section, key, cast=float):
    return field(default=default, metadata={"section": section, "key": key, "cast": cast})


@dataclass
class ScenarioConfig:
    """All knobs of a simulated scenario.

    Distances are in meters, angles in radians, powers in watts and
    frequencies in Hz. ``None`` for ``array_ris_distance`` and
    ``ris_element_spacing`` means five and one half wavelengths,
    respectively; ``None`` for ``prelog`` means the training-overhead
    prelog ``(coherence_length - Q * pilot_length) / coherence_length``;
    ``None`` for ``phase_bits`` means continuous phases.
    """

    carrier_frequency: float = _f(1.9e9, "carrier", "frequency_hz")
    bandwidth: float = _f(20e6, "carrier", "bandwidth_hz")
    noise_figure: float = _f(5.0, "carrier", "noise_figure_db")
    noise_psd: float = _f(-174.0, "carrier", "noise_psd_dbm_hz")
    ris_noise_figure: float | None = _f(None, "carrier", "ris_noise_figure_db", _opt_float)

    architecture: str = _f("ris", "array", "architecture", str)
    n_active: int = _f(8, "array", "n_active", int)
    sector_width: float = _f(math.pi, "array", "sector_width_rad")
    array_ris_distance: float | None = _f(None, "array", "array_ris_distance_m", _opt_float)

    n_ris: int = _f(32, "ris", "n_elements", int)
    ris_element_spacing: float | None = _f(None, "ris", "element_spacing_m", _opt_float)
    ris_efficiency: float = _f(1.0, "ris", "efficiency")
    ris_element_gain: float = _f(2.0, "ris", "element_gain")
    ris_height: float = _f(10.0, "ris", "height_m")
    ris_mode: str = _f("passive", "ris", "mode", str)
    ris_policy: str = _f("optimized", "ris", "policy", str)
    phase_bits: int | None = _f(None, "ris", "phase_bits", _phase_bits)

    ue_count: int = _f(4, "users", "count", int)
    ue_height: float = _f(1.5, "users", "height_m")
    ue_sector: tuple[float, float] = _f((-math.pi / 3, math.pi / 3), "users", "sector_rad", _pair)
    ue_radius: tuple[float, float] = _f((10.0, 400.0), "users", "radius_m", _pair)
    shadowing: bool = _f(False, "users", "shadowing", _bool)
    shadowing_std: float = _f(7.82, "users", "shadowing_std_db")

    pilot_length: int = _f(8, "training", "pilot_length", int)
    uplink_pilot_power: float = _f(0.4, "training", "uplink_power_w")
    svd_energy_fraction: float = _f(0.98, "training", "svd_energy_fraction")
    training_gain_db: float = _f(3.0, "training", "active_gain_db")

    power_budget: float = _f(12.0, "power", "budget_w")
    power_split: float = _f(0.0, "power", "ris_fraction")
    bisection_tol: float = _f(1e-4, "power", "bisection_tol")

    coherence_length: int = _f(200, "link", "coherence_length", int)
    prelog: float | None = _f(None, "link", "prelog", _opt_float)
    n_fading: int = _f(10, "link", "n_fading", int)

    grid_size: int = _f(256, "optimizer", "grid_size", int)
    max_sweeps: int = _f(100, "optimizer", "max_sweeps", int)
    max_iters: int = _f(2000, "optimizer", "max_iters", int)
    opt_tol: float = _f(1e-6, "optimizer", "tol")

    rng_seed: int = _f(0, "seed", "value", int)

    # ------------------------------------------------------------------ derived
    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def distance(self) -> float:
        """Array-to-RIS distance ``D`` in meters."""
        if self.array_ris_distance is None:
            return 5.0 * self.wavelength
        return self.array_ris_distance

    @property
    def ris_spacing(self) -> float:
        if self.ris_element_spacing is None:
            return 0.5 * self.wavelength
        return self.ris_element_spacing

    @property
    def is_legacy(self) -> bool:
        return self.architecture == "legacy"

    @property
    def delta(self) -> int:
        """1 for an amplifying RIS, 0 otherwise.

        An active RIS with ``power_split == 0`` has no power to amplify and
        is simulated as a passive one.
        """
        return int(self.ris_mode == "active" and self.power_split > 0 and not self.is_legacy)

    @property
    def n_elements(self) -> int:
        """Length of the UE channel vectors (``N_A`` for legacy MIMO)."""
        return self.n_active if self.is_legacy else self.n_ris

    @property
    def n_epochs(self) -> int:
        """Number of training epochs ``Q``."""
        if self.is_legacy:
            return 1
        return math.ceil(self.n_ris / self.n_active)

    @property
    def noise_power(self) -> float:
        """Thermal noise power per receive dimension, watts."""
        return _noise_watts(self.noise_psd, self.bandwidth, self.noise_figure)

    @property
    def ris_noise_power(self) -> float:
        nf = self.noise_figure if self.ris_noise_figure is None else self.ris_noise_figure
        return _noise_watts(self.noise_psd, self.bandwidth, nf)

    @property
    def effective_prelog(self) -> float:
        if self.prelog is not None:
            return self.prelog
        used = self.n_epochs * self.pilot_length
        return max(self.coherence_length - used, 0) / self.coherence_length

    @property
    def array_budget(self) -> float:
        """Power available at the active array, ``(1 - eps) P_B``."""
        return (1.0 - self.power_split) * self.power_budget

    # ----------------------------------------------------------------- checks
    def validate(self) -> "ScenarioConfig":
        errors = []
        if self.architecture not in ("ris", "legacy"):
            errors.append(f"architecture must be 'ris' or 'legacy', got {self.architecture!r}")
        if self.ris_mode not in ("passive", "active"):
            errors.append(f"ris mode must be 'passive' or 'active', got {self.ris_mode!r}")
        if self.ris_policy not in ("optimized", "random"):
            errors.append(f"ris policy must be 'optimized' or 'random', got {self.ris_policy!r}")
        if self.n_active < 1:
            errors.append("n_active must be >= 1")
        if not self.is_legacy and self.n_ris < self.n_active:
            errors.append("n_ris must be >= n_active")
        if self.ue_count < 1:
            errors.append("ue count must be >= 1")
        if self.pilot_length < 1:
            errors.append("pilot_length must be >= 1")
        if not 0.0 <= self.power_split < 1.0:
            errors.append("power_split must lie in [0, 1)")
        if self.ris_mode == "passive" and self.power_split != 0.0:
            errors.append("power_split must be 0 for a passive RIS")
        if not 0.0 < self.svd_energy_fraction <= 1.0:
            errors.append("svd_energy_fraction must lie in (0, 1]")
        if not 0.0 < self.ris_efficiency <= 1.0:
            errors.append("ris efficiency must lie in (0, 1]")
        if not 0.0 < self.sector_width <= math.pi:
            errors.append("sector_width must lie in (0, pi]")
        if self.distance <= 0:
            errors.append("array_ris_distance must be positive")
        if self.prelog is not None and not 0.0 < self.prelog <= 1.0:
            errors.append("prelog must lie in (0, 1]")
        if self.phase_bits is not None and self.phase_bits < 1:
            errors.append("phase_bits must be >= 1 or 'continuous'")
        if self.ue_radius[0] <= 0 or self.ue_radius[1] < self.ue_radius[0]:
            errors.append("ue radius range must be positive and ordered")
        if self.power_budget <= 0 or self.uplink_pilot_power <= 0:
            errors.append("powers must be positive")
        if self.n_fading < 1:
            errors.append("n_fading must be >= 1")
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    # -------------------------------------------------------------------- I/O
    def to_dict(self) -> dict[str, dict[str, Any]]:
        out: dict[str, dict[str, Any]] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            if f.name == "phase_bits" and value is None:
                value = "continuous"
            out.setdefault(f.metadata["section"], {})[f.metadata["key"]] = value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        known = {(f.metadata["section"], f.metadata["key"]): f for f in dataclasses.fields(cls)}
        kwargs = {}
        for section, entries in (data or {}).items():
            if not isinstance(entries, dict):
                raise ConfigError(f"section {section!r} must be a mapping")
            for key, value in entries.items():
                f = known.get((section, key))
                if f is None:
                    raise ConfigError(f"unknown key {section}.{key}")
                try:
                    kwargs[f.name] = f.metadata["cast"](value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {section}.{key}: {value!r}") from exc
        return cls(**kwargs)


def _noise_watts(psd_dbm_hz: float, bandwidth: float, figure_db: float) -> float:
    dbm = psd_dbm_hz + 10.0 * math.log10(bandwidth) + figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


PRESETS = {
    "desk": {},
    "full": {"n_active": 16, "n_ris": 64, "ue_count": 8},
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ScenarioConfig(**{**base, **overrides}).validate()


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario file; ``preset: <name>`` at top level selects a base preset."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    base = data.pop("preset", None)
    cfg = ScenarioConfig.from_dict(data)
    if base is not None:
        explicit = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)
                    if (f.metadata["section"] in data
                        and f.metadata["key"] in data[f.metadata["section"]])}
        cfg = preset(base, **explicit)
    return cfg.validate()


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
