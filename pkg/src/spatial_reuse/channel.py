"""Log-distance path loss, SINR with adjacent-channel leakage, Shannon throughput."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Deployment


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    """Inverse of :func:`dbm_to_mw`; 0 mW maps to ``-inf`` dBm."""
    return 10.0 * math.log10(mw) if mw > 0 else -math.inf


@dataclass(frozen=True)
class Arm:
    channel: int
    tx_power_dbm: float


@dataclass(frozen=True)
class ArmSpace:
    """Arm k = channel * len(tx_powers_dbm) + power_index."""

    n_channels: int = 3
    tx_powers_dbm: tuple[float, ...] = (-15.0, 0.0, 15.0, 30.0)

    def __post_init__(self):
        if self.n_channels < 1 or not self.tx_powers_dbm:
            raise ValueError("arm space needs >= 1 channel and >= 1 power level")

    @property
    def n_powers(self) -> int:
        return len(self.tx_powers_dbm)

    @property
    def size(self) -> int:
        return self.n_channels * self.n_powers

    @property
    def max_power_dbm(self) -> float:
        return max(self.tx_powers_dbm)

    def arm(self, k: int) -> Arm:
        c, p = divmod(int(k), self.n_powers)
        if not 0 <= c < self.n_channels:
            raise IndexError(f"arm index {k} out of range")
        return Arm(c, float(self.tx_powers_dbm[p]))

    def index(self, arm: Arm) -> int:
        return arm.channel * self.n_powers + self.tx_powers_dbm.index(arm.tx_power_dbm)

    def channels(self, k):
        return np.asarray(k) // self.n_powers

    def power_indices(self, k):
        return np.asarray(k) % self.n_powers


@dataclass(frozen=True)
class RadioParams:
    pl0_db: float = 5.0
    alpha: float = 4.0
    d_obs_m: float = 5.0
    noise_dbm: float = -100.0
    bandwidth_mhz: float = 20.0
    leakage_db_per_channel: float = 20.0
    # Tx power at which the isolation throughput used for reward normalization
    # is evaluated: "max" (largest available power) or "own" (the arm's power).
    reference_power: str = "own"

    def __post_init__(self):
        if self.bandwidth_mhz <= 0 or self.alpha <= 0 or self.leakage_db_per_channel < 0 or self.d_obs_m <= 0:
            raise ValueError("need bandwidth > 0, alpha > 0, d_obs > 0 and leakage step >= 0")
        if self.reference_power not in ("max", "own"):
            raise ValueError(f"reference_power must be 'max' or 'own', got {self.reference_power!r}")


def path_loss_db(d_m: float, g_s_db: float, g_o_db: float, params: RadioParams) -> float:
    if d_m <= 0:
        raise ValueError(f"distance must be positive, got {d_m} m")
    return params.pl0_db + 10.0 * params.alpha * math.log10(d_m) + g_s_db + (d_m / params.d_obs_m) * g_o_db


def received_power_dbm(tx_dbm: float, loss_db: float) -> float:
    return tx_dbm - loss_db


@dataclass(frozen=True)
class LinkBudget:
    """``gain_db[i, j]``: total loss from the AP of WN i to the STA of WN j."""

    gain_db: np.ndarray

    @classmethod
    def from_deployment(cls, deployment: Deployment, params: RadioParams) -> "LinkBudget":
        d = deployment.distances()
        if np.any(d <= 0):
            raise ValueError("an AP is co-located with a STA")
        g = (
            params.pl0_db
            + 10.0 * params.alpha * np.log10(d)
            + deployment.shadow_db
            + (d / params.d_obs_m) * deployment.obstacle_db
        )
        g.setflags(write=False)
        return cls(g)


def interference_dbm(target_wn: int, action_profile, budget: LinkBudget, params: RadioParams) -> float:
    """Aggregate interference at the STA of ``target_wn``.

    ``action_profile`` is a sequence of ``(wn_id, Arm, active)``. Contributions are
    summed in mW; no interferers gives ``-inf``.
    """
    by_id = {wn: (arm, active) for wn, arm, active in action_profile}
    own_channel = by_id[target_wn][0].channel
    total_mw = 0.0
    for wn, (arm, active) in by_id.items():
        if wn == target_wn or not active:
            continue
        leak = params.leakage_db_per_channel * abs(arm.channel - own_channel)
        total_mw += dbm_to_mw(received_power_dbm(arm.tx_power_dbm, budget.gain_db[wn, target_wn]) - leak)
    return mw_to_dbm(total_mw)


def sinr(p_rx_dbm: float, i_dbm: float, noise_dbm: float) -> float:
    i_mw = 0.0 if i_dbm == -math.inf else dbm_to_mw(i_dbm)
    return dbm_to_mw(p_rx_dbm) / (i_mw + dbm_to_mw(noise_dbm))


def throughput_mbps(sinr_linear: float, bandwidth_mhz: float) -> float:
    if sinr_linear < 0:
        raise ValueError("SINR must be non-negative")
    return bandwidth_mhz * math.log2(1.0 + sinr_linear)


def optimal_throughput_mbps(wn: int, budget: LinkBudget, params: RadioParams, arm: Arm) -> float:
    """Isolation throughput of ``wn`` transmitting with ``arm`` (channel is irrelevant)."""
    p_rx = received_power_dbm(arm.tx_power_dbm, budget.gain_db[wn, wn])
    return throughput_mbps(sinr(p_rx, -math.inf, params.noise_dbm), params.bandwidth_mhz)


def reward(throughput: float, optimal: float) -> float:
    if optimal <= 0:
        raise ValueError("optimal throughput must be positive")
    r = throughput / optimal
    assert r <= 1.0 + 1e-12, f"reward {r} exceeds 1: throughput above isolation optimum"
    return r


@dataclass
class ChannelModel:
    """Precomputed link tables for fast evaluation of joint action profiles.

    A profile is an integer array of arm indices, one per WN; ``-1`` or a False
    entry in ``active`` marks a WN that neither transmits nor receives.
    """

    budget: LinkBudget
    params: RadioParams = field(default_factory=RadioParams)
    arms: ArmSpace = field(default_factory=ArmSpace)

    def __post_init__(self):
        g = self.budget.gain_db
        powers = np.asarray(self.arms.tx_powers_dbm, dtype=float)
        # rx_mw[p, i, j]: power from AP i at STA j when AP i uses power level p.
        self.rx_mw = 10.0 ** ((powers[:, None, None] - g[None, :, :]) / 10.0)
        seps = np.arange(self.arms.n_channels)
        self.leak_factor = 10.0 ** (-self.params.leakage_db_per_channel * seps / 10.0)
        self.noise_mw = 10.0 ** (self.params.noise_dbm / 10.0)
        n = g.shape[0]
        self.n_wns = n
        self._offdiag = ~np.eye(n, dtype=bool)
        own = np.diag(g)
        snr = 10.0 ** ((powers[:, None] - own[None, :]) / 10.0) / self.noise_mw
        # isolation[p, i]: isolation throughput of WN i at power level p.
        self.isolation_mbps = self.params.bandwidth_mhz * np.log2(1.0 + snr)
        self.optimal_max_mbps = self.isolation_mbps[int(np.argmax(powers))]

    @classmethod
    def from_deployment(cls, deployment: Deployment, params: RadioParams | None = None, arms: ArmSpace | None = None):
        params = params or RadioParams()
        return cls(LinkBudget.from_deployment(deployment, params), params, arms or ArmSpace())

    def evaluate_batch(self, profiles, active=None):
        """Throughput (Mbps) and reward for a batch of profiles, shape (P, N).

        Inactive entries get throughput 0 and reward NaN.
        """
        profiles = np.asarray(profiles, dtype=np.int64)
        squeeze = profiles.ndim == 1
        profiles = np.atleast_2d(profiles)
        P, n = profiles.shape
        if active is None:
            active = profiles >= 0
        else:
            active = np.broadcast_to(np.asarray(active, dtype=bool), profiles.shape) & (profiles >= 0)
        arm_idx = np.where(active, profiles, 0)
        ch = arm_idx // self.arms.n_powers
        pw = arm_idx % self.arms.n_powers
        wn = np.arange(n)
        # tx[b, i, j]: mW from AP i seen at STA j in profile b.
        tx = self.rx_mw[pw[:, :, None], wn[None, :, None], wn[None, None, :]]
        sep = np.abs(ch[:, :, None] - ch[:, None, :])
        contrib = tx * self.leak_factor[sep] * active[:, :, None]
        signal = contrib[:, wn, wn]
        interference = (contrib * self._offdiag).sum(axis=1)
        sinr_lin = signal / (interference + self.noise_mw)
        tpt = self.params.bandwidth_mhz * np.log2(1.0 + sinr_lin)
        if self.params.reference_power == "max":
            ref = np.broadcast_to(self.optimal_max_mbps, tpt.shape)
        else:
            ref = self.isolation_mbps[pw, wn[None, :]]
        rew = tpt / ref
        tpt = np.where(active, tpt, 0.0)
        rew = np.where(active, rew, np.nan)
        if squeeze:
            return tpt[0], rew[0]
        return tpt, rew
