"""Pipeline settings and YAML loaders for config and scene files.

Config file schema (all keys optional except where noted)::

    carrier_frequency_hz: 77.0e9
    chirp_slope_hz_per_s: 30.0e12
    sample_rate_hz: 5.0e6
    samples_per_chirp: 128
    chirps_per_frame: 64
    chirp_interval_s: 120.0e-6
    tdm_interleaved: false
    antennas: [[0, 0, 0], [1, 0, 0], ...]   # units of lambda/2
    zero_elevation_indices: [0, 1, ...]      # default: antennas with z == 0
    tx_index: [0, 0, ...]                    # optional TDM slot per antenna
    pipeline:
      pipeline: capon            # or fft
      azimuth_bins: 188
      azimuth_max_deg: 70
      elevation_bins: 101
      elevation_max_deg: 25
      loading: 1.0e-3
      loading_reference: frame   # or bin
      floor_rel: 2.2e-16
      peak_rel_threshold: 0.5
      peak_grouping: true
      noise_loading: 10.0        # loading floor, in units of the noise power
      range_window: none         # or hann
      doppler_window: none
      azimuth_fft_n: 64
      elevation_fft_n: 32
      cfar: {train_cells_per_side: 8, guard_cells_per_side: 2,
             rank_fraction: 0.75, pfa: 1.0e-4, scale_alpha: null,
             min_rel_power: 1.0e-20}

Scene file schema::

    noise_std: 0.01
    seed: 7
    scatterers:
      - {mu: 0.1, nu: 0.0, range_m: 5.0, velocity_mps: 1.2, amplitude: 1.0}
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
import re
from typing import Any

import numpy as np
import yaml

from .array_model import (
    AWR1843_TX_INDEX,
    AWR1843_VIRTUAL_ARRAY,
    ArrayGeometry,
    DirectionGrid,
    DoaDirection,
    WaveformConfig,
    default_waveform,
)
from .cfar import CfarParams
from .errors import ConfigError, ValidationError
from .scene import Scatterer, Scene

WINDOWS = ("none", "hann")


@dataclass(frozen=True)
class PipelineConfig:
    pipeline: str = "capon"
    grid: DirectionGrid = field(default_factory=DirectionGrid)
    loading: float = 1e-3
    loading_reference: str = "frame"
    floor_rel: float = float(np.finfo(float).eps)
    peak_rel_threshold: float = 0.5
    peak_grouping: bool = True
    noise_loading: float = 10.0
    range_window: str = "none"
    doppler_window: str = "none"
    azimuth_fft_n: int = 64
    elevation_fft_n: int = 32
    cfar: CfarParams = field(default_factory=CfarParams)

    def __post_init__(self):
        if self.pipeline not in ("capon", "fft"):
            raise ConfigError(f"pipeline must be 'capon' or 'fft', got {self.pipeline!r}")
        if self.loading < 0:
            raise ConfigError("loading must be >= 0")
        if not self.noise_loading >= 0:
            raise ConfigError("noise_loading must be >= 0")
        if self.loading_reference not in ("frame", "bin"):
            raise ConfigError("loading_reference must be 'frame' or 'bin'")
        if not 0.0 < self.peak_rel_threshold <= 1.0:
            raise ConfigError("peak_rel_threshold must be in (0, 1]")
        for name in ("range_window", "doppler_window"):
            if getattr(self, name) not in WINDOWS:
                raise ConfigError(f"{name} must be one of {WINDOWS}")
        for name in ("azimuth_fft_n", "elevation_fft_n"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2")

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)

    def describe(self) -> dict[str, Any]:
        """Flat mapping of every effective tunable (echoed by the CLI)."""
        out = {f.name: getattr(self, f.name) for f in fields(self)
               if f.name not in ("grid", "cfar")}
        g = self.grid
        out.update(azimuth_bins=g.azimuth_bins, azimuth_max_deg=g.azimuth_max_deg,
                   elevation_bins=g.elevation_bins, elevation_max_deg=g.elevation_max_deg)
        for k, v in asdict(self.cfar).items():
            out[f"cfar.{k}"] = v
        out["cfar.alpha"] = self.cfar.alpha
        return out


@dataclass(frozen=True)
class RadarConfig:
    waveform: WaveformConfig
    geometry: ArrayGeometry
    pipeline: PipelineConfig


_WAVEFORM_KEYS = {
    "carrier_frequency_hz": "carrier_frequency",
    "chirp_slope_hz_per_s": "chirp_slope",
    "sample_rate_hz": "sample_rate",
    "samples_per_chirp": "samples_per_chirp",
    "chirps_per_frame": "chirps_per_frame",
    "chirp_interval_s": "chirp_interval",
    "tdm_interleaved": "tdm_interleaved",
}
_GRID_KEYS = ("azimuth_bins", "azimuth_max_deg", "elevation_bins", "elevation_max_deg")
_TOP_KEYS = set(_WAVEFORM_KEYS) | {"antennas", "zero_elevation_indices", "tx_index", "pipeline"}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads floats such as ``1e-3`` (no exponent sign
    or no dot), which plain YAML 1.1 resolution leaves as strings."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                   |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                   |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                   |[-+]?\.(?:inf|Inf|INF)
                   |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def _read_yaml(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.load(fh, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def pipeline_from_dict(d: dict | None) -> PipelineConfig:
    d = dict(d or {})
    grid_args = {k: d.pop(k) for k in _GRID_KEYS if k in d}
    cfar_args = d.pop("cfar", None) or {}
    known = {f.name for f in fields(PipelineConfig)} - {"grid", "cfar"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown pipeline keys: {sorted(unknown)}")
    try:
        return PipelineConfig(grid=DirectionGrid(**grid_args), cfar=CfarParams(**cfar_args), **d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(d: dict) -> RadarConfig:
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    defaults = default_waveform()
    wf_args = {attr: getattr(defaults, attr) for attr in _WAVEFORM_KEYS.values()}
    for key, attr in _WAVEFORM_KEYS.items():
        if key in d:
            wf_args[attr] = d[key]
    for attr in ("samples_per_chirp", "chirps_per_frame"):
        v = wf_args[attr]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
            raise ConfigError(f"{attr} must be an integer, got {v!r}")
        wf_args[attr] = int(v)
    waveform = WaveformConfig(**wf_args)
    if "antennas" in d:
        antennas = d["antennas"]
        tx = d.get("tx_index")
    else:
        antennas, tx = AWR1843_VIRTUAL_ARRAY, d.get("tx_index", AWR1843_TX_INDEX)
    units = np.asarray(antennas, dtype=float)
    if units.ndim != 2 or units.shape[1] != 3:
        raise ConfigError("antennas must be a list of [x, y, z] triples")
    geometry = ArrayGeometry.from_half_wavelength(
        units, waveform.wavelength, d.get("zero_elevation_indices"), tx)
    return RadarConfig(waveform, geometry, pipeline_from_dict(d.get("pipeline")))


def load_config(path) -> RadarConfig:
    return config_from_dict(_read_yaml(path))


def default_config() -> RadarConfig:
    return config_from_dict({})


def scene_from_dict(d: dict) -> Scene:
    unknown = set(d) - {"noise_std", "seed", "scatterers"}
    if unknown:
        raise ConfigError(f"unknown scene keys: {sorted(unknown)}")
    scatterers = []
    for i, s in enumerate(d.get("scatterers") or []):
        try:
            scatterers.append(Scatterer(
                DoaDirection(s["mu"], s.get("nu", 0.0)),
                float(s["range_m"]),
                float(s.get("velocity_mps", 0.0)),
                float(s.get("amplitude", 1.0)),
            ))
        except KeyError as exc:
            raise ValidationError(f"scatterer {i}: missing key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"scatterer {i}: malformed entry ({exc})") from exc
        except ValidationError as exc:
            raise ValidationError(f"scatterer {i}: {exc}") from exc
    return Scene(tuple(scatterers), float(d.get("noise_std", 0.0)), int(d.get("seed", 0)))


def load_scene(path) -> Scene:
    return scene_from_dict(_read_yaml(path))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "noise_std": float(scene.noise_std),
        "seed": int(scene.rng_seed),
        "scatterers": [
            {"mu": s.direction.mu, "nu": s.direction.nu, "range_m": s.range,
             "velocity_mps": s.radial_velocity, "amplitude": s.amplitude}
            for s in scene.scatterers
        ],
    }


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(yaml.safe_dump(scene_to_dict(scene), sort_keys=False))
