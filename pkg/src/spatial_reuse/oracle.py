"""Exhaustive joint-profile search and hindsight regret."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import Arm, ChannelModel
from .orchestrator import RunResult

OBJECTIVES = ("proportional_fair", "max_aggregate")
DEFAULT_PROFILE_CAP = 10**7


class OracleBudgetError(RuntimeError):
    pass


@dataclass
class OracleResult:
    objective: str
    best_profile: list[Arm]
    best_indices: tuple[int, ...]
    objective_value: float
    per_wn_throughput: list[float]
    profiles_evaluated: int

    @property
    def aggregate_mbps(self) -> float:
        return float(sum(self.per_wn_throughput))

    def to_text(self) -> str:
        lines = [
            f"objective={self.objective}",
            f"objective_value={self.objective_value!r}",
            f"aggregate_mbps={self.aggregate_mbps!r}",
            "best_arms=" + ",".join(str(k) for k in self.best_indices),
            "best_profile=" + ";".join(f"{a.channel}:{a.tx_power_dbm:g}" for a in self.best_profile),
            "per_wn_throughput_mbps=" + ",".join(repr(float(v)) for v in self.per_wn_throughput),
            f"profiles_evaluated={self.profiles_evaluated}",
        ]
        return "\n".join(lines) + "\n"


def write_oracle(result: OracleResult, path: str | Path) -> None:
    Path(path).write_text(result.to_text(), encoding="utf-8", newline="\n")


def read_oracle(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def objective_values(tpt: np.ndarray, objective: str) -> np.ndarray:
    """Row-wise objective. PF is sum(log Γ); rows with any Γ = 0 score -inf."""
    if objective == "max_aggregate":
        return tpt.sum(axis=1)
    if objective == "proportional_fair":
        with np.errstate(divide="ignore"):
            return np.log(tpt).sum(axis=1)
    raise ValueError(f"unknown objective {objective!r}")


def _lex_smallest(rows: np.ndarray) -> np.ndarray:
    # np.lexsort treats the last key as primary.
    order = np.lexsort(rows.T[::-1])
    return rows[order[0]]


def _profiles(flat: np.ndarray, n_arms: int, n_wns: int) -> np.ndarray:
    return np.stack(np.unravel_index(flat, (n_arms,) * n_wns), axis=1).astype(np.int64)


def brute_force(model: ChannelModel, objective: str = "proportional_fair", *, order: str = "lexicographic",
                cap: int = DEFAULT_PROFILE_CAP, chunk: int = 1 << 15, seed: int = 0) -> OracleResult:
    """Evaluate every joint profile; ties go to the lexicographically smallest arm vector.

    ``order`` is the enumeration order: "lexicographic", "reverse" or "shuffled"
    (a seeded permutation). The result does not depend on it.
    """
    k, n = model.arms.size, model.n_wns
    total = k**n
    if total > cap:
        raise OracleBudgetError(
            f"{k}^{n} = {total} profiles exceeds the cap of {cap}; reduce the number of WNs "
            "or use sampled_search() for an approximate max-aggregate baseline"
        )
    if order == "lexicographic":
        flat = np.arange(total, dtype=np.int64)
    elif order == "reverse":
        flat = np.arange(total - 1, -1, -1, dtype=np.int64)
    elif order == "shuffled":
        flat = np.random.default_rng(seed).permutation(total).astype(np.int64)
    else:
        raise ValueError(f"unknown order {order!r}")
    best_val = -np.inf
    best = None
    for start in range(0, total, chunk):
        profiles = _profiles(flat[start:start + chunk], k, n)
        tpt, _ = model.evaluate_batch(profiles)
        vals = objective_values(tpt, objective)
        top = vals.max()
        if top == -np.inf:
            continue
        cand = _lex_smallest(profiles[vals == top])
        if best is None or top > best_val or (top == best_val and tuple(cand) < tuple(best)):
            best_val, best = top, cand
    if best is None:
        raise RuntimeError("no profile has a finite objective")
    tpt, _ = model.evaluate_batch(best)
    return OracleResult(
        objective=objective,
        best_profile=[model.arms.arm(a) for a in best],
        best_indices=tuple(int(a) for a in best),
        objective_value=float(best_val),
        per_wn_throughput=[float(v) for v in tpt],
        profiles_evaluated=total,
    )


def sampled_search(model: ChannelModel, objective: str, n_samples: int, rng: np.random.Generator) -> OracleResult:
    """Best of ``n_samples`` uniformly random profiles; a lower bound for large N."""
    profiles = rng.integers(model.arms.size, size=(n_samples, model.n_wns))
    tpt, _ = model.evaluate_batch(profiles)
    vals = objective_values(tpt, objective)
    top = vals.max()
    best = _lex_smallest(profiles[vals == top])
    g, _ = model.evaluate_batch(best)
    return OracleResult(objective, [model.arms.arm(a) for a in best], tuple(int(a) for a in best),
                        float(top), [float(v) for v in g], n_samples)


def hindsight_rewards(trace: RunResult, model: ChannelModel, wn: int) -> np.ndarray:
    """``(T, K)`` rewards WN ``wn`` would have earned playing each fixed arm
    against the logged opponent actions (0 where ``wn`` was inactive)."""
    k = model.arms.size
    T = trace.iterations
    active = trace.active[:, wn]
    profiles = np.repeat(trace.arms[None, :, :], k, axis=0)  # (K, T, N)
    profiles[:, :, wn] = np.where(active[None, :], np.arange(k)[:, None], -1)
    _, r = model.evaluate_batch(profiles.reshape(k * T, -1))
    r = r[:, wn].reshape(k, T).T
    return np.where(active[:, None], r, 0.0)


def empirical_regret(trace: RunResult, model: ChannelModel) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative regret against the best fixed own-arm in hindsight.

    Returns ``(regret, best_arms)`` with ``regret`` of shape (N, T): entry
    ``[i, t]`` is the regret of WN i accumulated over iterations 0..t.
    """
    n, T = trace.n_wns, trace.iterations
    regret = np.zeros((n, T))
    best_arms = np.zeros(n, dtype=np.int64)
    for i in range(n):
        alt = hindsight_rewards(trace, model, i)
        best = int(np.argmax(alt.sum(axis=0)))
        got = np.where(trace.active[:, i], trace.reward[:, i], 0.0)
        regret[i] = np.cumsum(alt[:, best] - got)
        best_arms[i] = best
    return regret, best_arms
