"""Deployment construction: grid, random and dynamic-activation scenarios.

Every random quantity here is drawn from a named stream derived from the
deployment seed, so a (seed, config) pair always yields the same layout and
the same static shadowing/obstacle draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_GRID_APS = ((3.0, 2.5, 3.0), (7.0, 2.5, 3.0), (3.0, 2.5, 7.0), (7.0, 2.5, 7.0))
# Unit directions pointing each STA away from the other three networks.
DEFAULT_GRID_STA_DIRS = ((-1.0, 0.0, -1.0), (1.0, 0.0, -1.0), (-1.0, 0.0, 1.0), (1.0, 0.0, 1.0))

# Stream keys for SeedSequence splitting.
STREAM_PLACEMENT = 0
STREAM_CHANNEL = 1
STREAM_POLICY = 2
STREAM_INITIAL_ARM = 3


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


class PlacementError(RuntimeError):
    """STA placement did not fit in the map within the retry budget."""


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key)``; PCG64 seeded by SeedSequence."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class ScenarioConfig:
    map_size: tuple[float, float, float] = (10.0, 5.0, 10.0)
    n_wns: int = 4
    ap_sta_distance: float = math.sqrt(2.0)
    shadow_mean_db: float = 9.5
    shadow_std_db: float = 2.5
    obstacle_min_db: float = 10.0
    obstacle_max_db: float = 50.0
    grid_ap_positions: tuple = DEFAULT_GRID_APS
    grid_sta_directions: tuple = DEFAULT_GRID_STA_DIRS
    activations: tuple[int, ...] = (0, 0, 2500, 5000)
    iterations: int = 10_000
    max_placement_retries: int = 1000


@dataclass(frozen=True)
class WnPlacement:
    wn_id: int
    ap_position: tuple[float, float, float]
    sta_position: tuple[float, float, float]
    activation_iteration: int = 0


@dataclass
class Deployment:
    map_size: tuple[float, float, float]
    wns: list[WnPlacement]
    shadow_db: np.ndarray
    obstacle_db: np.ndarray
    seed: int
    kind: str = "grid"

    @property
    def n_wns(self) -> int:
        return len(self.wns)

    @property
    def ap_positions(self) -> np.ndarray:
        return np.array([w.ap_position for w in self.wns], dtype=float)

    @property
    def sta_positions(self) -> np.ndarray:
        return np.array([w.sta_position for w in self.wns], dtype=float)

    @property
    def activations(self) -> np.ndarray:
        return np.array([w.activation_iteration for w in self.wns], dtype=int)

    def distances(self) -> np.ndarray:
        """``d[i, j]``: metres from the AP of WN i to the STA of WN j."""
        diff = self.ap_positions[:, None, :] - self.sta_positions[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))

    def to_bytes(self) -> bytes:
        parts = [
            np.asarray(self.map_size, dtype=float).tobytes(),
            self.ap_positions.tobytes(),
            self.sta_positions.tobytes(),
            self.activations.astype(np.int64).tobytes(),
            self.shadow_db.tobytes(),
            self.obstacle_db.tobytes(),
            np.int64(self.seed).tobytes(),
        ]
        return b"".join(parts)


def _inside(p: np.ndarray, map_size) -> bool:
    return bool(np.all(p >= 0.0) and np.all(p <= np.asarray(map_size, dtype=float)))


def draw_channel_randomness(deployment: Deployment, config: ScenarioConfig, rng: np.random.Generator):
    """One shadowing and one obstacle draw per ordered link (i, j), i != j.

    Diagonal entries (a WN's own AP->STA link) are zero.
    """
    n = deployment.n_wns
    if config.shadow_std_db < 0 or config.obstacle_max_db < config.obstacle_min_db:
        raise ScenarioError("shadowing std must be >= 0 and obstacle range ordered")
    shadow = rng.normal(config.shadow_mean_db, config.shadow_std_db, size=(n, n))
    obstacle = rng.uniform(config.obstacle_min_db, config.obstacle_max_db, size=(n, n))
    np.fill_diagonal(shadow, 0.0)
    np.fill_diagonal(obstacle, 0.0)
    return shadow, obstacle


def _finish(config: ScenarioConfig, wns: list[WnPlacement], seed: int, kind: str) -> Deployment:
    for w in wns:
        if not (_inside(np.array(w.ap_position), config.map_size) and _inside(np.array(w.sta_position), config.map_size)):
            raise ScenarioError(f"WN {w.wn_id} lies outside the {config.map_size} map")
    n = len(wns)
    dep = Deployment(
        map_size=tuple(float(v) for v in config.map_size),
        wns=wns,
        shadow_db=np.zeros((n, n)),
        obstacle_db=np.zeros((n, n)),
        seed=seed,
        kind=kind,
    )
    dep.shadow_db, dep.obstacle_db = draw_channel_randomness(dep, config, stream(seed, STREAM_CHANNEL))
    return dep


def build_grid(config: ScenarioConfig | None = None, seed: int = 0) -> Deployment:
    """Symmetric 4-WN grid; STAs point away from the other networks."""
    config = config or ScenarioConfig()
    if config.n_wns != 4:
        raise ScenarioError(f"grid topology has exactly 4 WNs, got n_wns={config.n_wns}")
    if len(config.grid_ap_positions) != 4 or len(config.grid_sta_directions) != 4:
        raise ScenarioError("grid needs 4 AP positions and 4 STA directions")
    wns = []
    for i, (ap, direction) in enumerate(zip(config.grid_ap_positions, config.grid_sta_directions)):
        ap = np.asarray(ap, dtype=float)
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)
        sta = ap + config.ap_sta_distance * u
        wns.append(WnPlacement(i, tuple(ap.tolist()), tuple(sta.tolist()), 0))
    return _finish(config, wns, seed, "grid")


def build_random(config: ScenarioConfig | None = None, n_wns: int | None = None, seed: int = 0) -> Deployment:
    """APs uniform in the map; each STA at the configured distance in a uniform 3-D direction."""
    config = config or ScenarioConfig()
    n = config.n_wns if n_wns is None else n_wns
    if n < 1:
        raise ScenarioError("need at least one WN")
    rng = stream(seed, STREAM_PLACEMENT)
    size = np.asarray(config.map_size, dtype=float)
    wns = []
    for i in range(n):
        ap = rng.uniform(0.0, 1.0, size=3) * size
        for _ in range(config.max_placement_retries):
            u = rng.normal(size=3)
            norm = np.linalg.norm(u)
            if norm == 0.0:
                continue
            sta = ap + config.ap_sta_distance * (u / norm)
            if _inside(sta, size):
                break
        else:
            raise PlacementError(
                f"could not place STA of WN {i} within {config.max_placement_retries} tries; "
                "map too small for the AP-STA distance?"
            )
        wns.append(WnPlacement(i, tuple(ap.tolist()), tuple(sta.tolist()), 0))
    return _finish(config, wns, seed, "random")


def build_dynamic(config: ScenarioConfig | None = None, seed: int = 0) -> Deployment:
    """Grid geometry with per-WN activation iterations."""
    config = config or ScenarioConfig()
    acts = tuple(int(a) for a in config.activations)
    if len(acts) != config.n_wns:
        raise ScenarioError(f"need {config.n_wns} activation iterations, got {len(acts)}")
    for a in acts:
        if a < 0 or a > config.iterations:
            raise ScenarioError(f"activation iteration {a} outside [0, {config.iterations}]")
    dep = build_grid(config, seed)
    dep.wns = [
        WnPlacement(w.wn_id, w.ap_position, w.sta_position, a) for w, a in zip(dep.wns, acts)
    ]
    dep.kind = "dynamic"
    return dep


def build(scenario: str, config: ScenarioConfig, seed: int, n_wns: int | None = None) -> Deployment:
    if scenario == "grid":
        return build_grid(config, seed)
    if scenario == "random":
        return build_random(config, n_wns, seed)
    if scenario == "dynamic":
        return build_dynamic(config, seed)
    raise ScenarioError(f"unknown scenario {scenario!r}")
