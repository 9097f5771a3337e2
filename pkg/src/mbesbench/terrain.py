"""Deterministic procedural seafloor for desk-scale verification.

A straight-line survey over a sinusoidal-plus-noise depth field. Flat
configurations mimic the featureless bathymetry that makes registration
hard; adding spectrum components dials feature richness up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import PingTensor


@dataclass(frozen=True)
class TerrainConfig:
    """Depth field description.

    extent is the nominal survey footprint (along-track, across-track) in
    meters and provides geometry defaults for generation; components are
    (wavelength m, amplitude m) pairs.
    """

    seed: int
    extent: tuple[float, float] = (400.0, 120.0)
    base_depth: float = -100.0
    components: tuple[tuple[float, float], ...] = ((100.0, 5.0),)
    roughness_sigma: float = 0.2

    def __post_init__(self):
        for wavelength, amplitude in self.components:
            if wavelength <= 0:
                raise ValueError("wavelengths must be positive")
            if amplitude < 0:
                raise ValueError("amplitudes must be >= 0")
        if self.roughness_sigma < 0:
            raise ValueError("roughness_sigma must be >= 0")


def generate_terrain_pings(cfg: TerrainConfig, n_pings: int, n_beams: int,
                           swath_width: float | None = None,
                           along_track_step: float | None = None,
                           dropout: float = 0.0) -> PingTensor:
    """Survey the depth field along +x with beams fanned across y.

    z(x, y) = base + sum_i a_i sin(2 pi x / l_i + phase) cos(2 pi y / l_i + phase')
    plus iid N(0, roughness_sigma^2). Deterministic per config seed; dropout
    (fraction in [0, 1)) NaNs out random beams to exercise invalid-beam paths.
    """
    if n_pings < 1 or n_beams < 1:
        raise ValueError("n_pings and n_beams must be >= 1")
    if swath_width is None:
        swath_width = cfg.extent[1]
    if along_track_step is None:
        along_track_step = cfg.extent[0] / n_pings

    spacing = along_track_step
    if n_beams > 1:
        spacing = max(spacing, swath_width / (n_beams - 1))
    for wavelength, _ in cfg.components:
        if wavelength <= 2 * spacing:
            raise ValueError(f"wavelength {wavelength} not above 2x sample spacing {spacing}")

    rng = np.random.default_rng(cfg.seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(len(cfg.components), 2))

    x = np.arange(n_pings) * along_track_step
    y = np.linspace(-swath_width / 2.0, swath_width / 2.0, n_beams) if n_beams > 1 else np.zeros(1)
    xg, yg = np.meshgrid(x, y, indexing="ij")

    z = np.full_like(xg, cfg.base_depth)
    for (wavelength, amplitude), (p1, p2) in zip(cfg.components, phases):
        w = 2.0 * np.pi / wavelength
        z = z + amplitude * np.sin(w * xg + p1) * np.cos(w * yg + p2)
    if cfg.roughness_sigma > 0:
        z = z + rng.normal(0.0, cfg.roughness_sigma, size=z.shape)

    hits = np.stack([xg, yg, z], axis=2)
    if dropout > 0:
        mask = rng.random((n_pings, n_beams)) < dropout
        hits[mask] = np.nan
    return PingTensor(hits)
