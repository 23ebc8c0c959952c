"""Static deployment geometry: reflecting surface, access point, and the region of
interest discretized into equal blocks.

Everything downstream (channel gains, positioning loss, protocol) consumes the
precomputed distance arrays built here, so this module is the single owner of
coordinate conventions:

* the reflecting surface lies in a plane of constant x, elements on a centered
  rectangular grid in (y, z), row index running along y;
* the region of interest (ROI) is an axis-aligned box split into a uniform grid of
  blocks, centers enumerated in row-major (x, then y, then z) order;
* one candidate user position per block center.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Reject geometries where any propagation distance collapses below this, the
# free-space model diverges at zero range.
MIN_DISTANCE = 1e-9


def wavelength(carrier_frequency_hz: float) -> float:
    """Carrier wavelength in meters."""
    if carrier_frequency_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / carrier_frequency_hz


@dataclass
class SceneSpec:
    """Declarative scene description, mirrors the JSON schema one-to-one.

    Distances in meters, powers in dB, frequency in Hz. Gains are scalar
    (isotropic) and default to 1: ``tx_gain_direct``/``rx_gain_direct`` apply on
    the direct AP-to-user path, ``tx_gain_ris``/``rx_gain_ris`` on the reflected
    path. The ``reflect_*`` fields parameterize the phase-dependent reflection
    amplitude curve; ``reflect_ideal=True`` forces unit amplitude in every state.
    """

    soi_center: tuple = (1.5, 0.0, 0.0)
    soi_dims: tuple = (1.0, 1.0, 1.0)
    grid: tuple = (5, 5, 5)
    ap_position: tuple = (0.5, -0.5, 0.0)
    ris_center: tuple = (0.0, 0.0, 0.0)
    ris_grid: tuple = (4, 4)
    element_separation: float = 0.06
    carrier_frequency_hz: float = 2.4e9
    tx_power_db: float = 0.0
    noise_sigma_db: float = 2.0
    num_states: int = 4
    tx_gain_direct: float = 1.0
    rx_gain_direct: float = 1.0
    tx_gain_ris: float = 1.0
    rx_gain_ris: float = 1.0
    reflect_beta_min: float = 0.2
    reflect_phase_offset: float = 0.43 * np.pi
    reflect_sharpness: float = 1.6
    reflect_ideal: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("soi_center", "soi_dims", "grid", "ap_position", "ris_center", "ris_grid"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scene fields: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("soi_center", "soi_dims", "grid", "ap_position", "ris_center", "ris_grid"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class Scene:
    """Built scene: positions plus every pairwise distance the channel needs.

    All arrays are read-only so a single instance can be shared across worker
    threads or processes without copies.
    """

    spec: SceneSpec
    wavelength: float
    block_centers: np.ndarray      # (N, 3)
    cell_dims: np.ndarray          # (3,) edge lengths of one block
    element_positions: np.ndarray  # (M, 3)
    ap_position: np.ndarray        # (3,)
    ap_block_dist: np.ndarray      # (N,)  l_n
    ap_element_dist: np.ndarray    # (M,)  distance AP -> element m
    element_block_dist: np.ndarray  # (M, N) distance element m -> block n

    @property
    def n_blocks(self) -> int:
        return self.block_centers.shape[0]

    @property
    def n_elements(self) -> int:
        return self.element_positions.shape[0]

    @property
    def num_states(self) -> int:
        return self.spec.num_states

    @property
    def tx_power_db(self) -> float:
        return self.spec.tx_power_db

    @property
    def noise_sigma_db(self) -> float:
        return self.spec.noise_sigma_db


def _centered_offsets(count: int, separation: float) -> np.ndarray:
    return (np.arange(count) - (count - 1) / 2.0) * separation


def block_grid_centers(soi_center, soi_dims, grid) -> tuple[np.ndarray, np.ndarray]:
    """Centers of a uniform block grid filling the ROI box.

    Returns (centers (N, 3), cell_dims (3,)). Enumeration is row-major with x
    slowest and z fastest.
    """
    center = np.asarray(soi_center, dtype=float)
    dims = np.asarray(soi_dims, dtype=float)
    counts = np.asarray(grid, dtype=int)
    cell = dims / counts
    lo = center - dims / 2.0
    axes = [lo[d] + (np.arange(counts[d]) + 0.5) * cell[d] for d in range(3)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return centers, cell


def build_scene(spec: SceneSpec) -> Scene:
    """Validate a SceneSpec and precompute geometry.

    Raises ValueError on non-physical input: empty grids, fewer than 2 blocks,
    non-positive dimensions/frequency/noise, fewer than 2 reflection states, or
    any coincident positions (zero propagation distance).
    """
    counts = np.asarray(spec.grid, dtype=int)
    if len(counts) != 3 or np.any(counts < 1):
        raise ValueError("grid must be three positive block counts")
    n_blocks = int(np.prod(counts))
    if n_blocks < 2:
        raise ValueError("need at least 2 candidate blocks")
    dims = np.asarray(spec.soi_dims, dtype=float)
    if np.any(dims <= 0):
        raise ValueError("soi_dims must be positive")
    rows, cols = int(spec.ris_grid[0]), int(spec.ris_grid[1])
    if rows < 0 or cols < 0:
        raise ValueError("ris_grid counts cannot be negative")
    # rows*cols == 0 is allowed: it disables the surface and the channel
    # degenerates to the direct path only.
    if spec.element_separation <= 0:
        raise ValueError("element_separation must be positive")
    if spec.num_states < 2:
        raise ValueError("num_states must be at least 2")
    if spec.noise_sigma_db <= 0:
        raise ValueError("noise_sigma_db must be positive")
    for g in (spec.tx_gain_direct, spec.rx_gain_direct, spec.tx_gain_ris, spec.rx_gain_ris):
        if g <= 0:
            raise ValueError("antenna gains must be positive")
    lam = wavelength(spec.carrier_frequency_hz)

    centers, cell = block_grid_centers(spec.soi_center, spec.soi_dims, spec.grid)

    ris_center = np.asarray(spec.ris_center, dtype=float)
    y_off = _centered_offsets(rows, spec.element_separation)
    z_off = _centered_offsets(cols, spec.element_separation)
    yy, zz = np.meshgrid(y_off, z_off, indexing="ij")
    elements = np.column_stack([
        np.zeros(rows * cols),
        yy.ravel(),
        zz.ravel(),
    ]) + ris_center

    ap = np.asarray(spec.ap_position, dtype=float)

    ap_block = np.linalg.norm(centers - ap, axis=1)
    ap_elem = np.linalg.norm(elements - ap, axis=1)
    elem_block = np.linalg.norm(elements[:, None, :] - centers[None, :, :], axis=2)

    if ap_block.min() < MIN_DISTANCE:
        raise ValueError("AP coincides with a block center")
    if elements.shape[0] > 0:
        if ap_elem.min() < MIN_DISTANCE:
            raise ValueError("AP coincides with a surface element")
        if elem_block.min() < MIN_DISTANCE:
            raise ValueError("a surface element coincides with a block center")

    arrays = dict(
        block_centers=centers,
        cell_dims=cell,
        element_positions=elements,
        ap_position=ap,
        ap_block_dist=ap_block,
        ap_element_dist=ap_elem,
        element_block_dist=elem_block,
    )
    for a in arrays.values():
        a.setflags(write=False)
    return Scene(spec=spec, wavelength=lam, **arrays)


def load_scene_spec(path) -> SceneSpec:
    """Read the ``scene`` section of a JSON config file (or a bare scene object)."""
    with open(path) as fh:
        doc = json.load(fh)
    return SceneSpec.from_dict(doc.get("scene", doc) if isinstance(doc, dict) else doc)


def with_updates(spec: SceneSpec, **changes) -> SceneSpec:
    """Copy of a SceneSpec with fields replaced (sweep plumbing)."""
    return replace(spec, **changes)
