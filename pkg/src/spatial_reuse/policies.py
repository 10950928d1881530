"""Action-selection strategies: epsilon-greedy, EXP3, UCB, Thompson sampling, static.

Each policy is a :class:`PolicyState` plus free functions operating on it; the
generic :func:`select` / :func:`update` pair dispatches on ``state.kind``. The
round counter ``t`` is 1-based and advanced by ``select``. All argmax
operations break ties towards the lowest arm index.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

KINDS = ("egreedy", "exp3", "ucb", "thompson", "static")


@dataclass(frozen=True)
class PolicyParams:
    eps0: float = 1.0
    eta0: float = 0.1
    gamma: float = 0.0
    # EXP3 exponent eta*r_hat/K instead of eta*r_hat.
    exp3_divide_by_k: bool = False
    # False keeps epsilon fixed at eps0 (uniform play when eps0 = 1).
    eps_decay: bool = True
    # UCB: count the K initialization plays in t. When False, t restarts at 1
    # after the sweep and the index uses max(t, 2).
    ucb_count_init_plays: bool = True
    # Thompson mean update: "recency" is (r_hat*n + r)/(n + 2), which settles at
    # half the mean reward; "posterior" is the Gaussian posterior mean
    # (r_hat*(n + 1) + r)/(n + 2) = sum(r)/(n + 1).
    thompson_update: str = "posterior"

    def __post_init__(self):
        if self.thompson_update not in ("recency", "posterior"):
            raise ValueError(f"thompson_update must be 'recency' or 'posterior', got {self.thompson_update!r}")


@dataclass
class PolicyState:
    kind: str
    n_arms: int
    params: PolicyParams = field(default_factory=PolicyParams)
    t: int = 0
    counts: np.ndarray = None
    sums: np.ndarray = None
    means: np.ndarray = None
    log_weights: np.ndarray = None
    r_hat: np.ndarray = None
    eta_prev: float = 0.0
    last_prob: float = 1.0
    fixed_arm: int = -1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {KINDS}")
        k = self.n_arms
        if self.counts is None:
            self.counts = np.zeros(k, dtype=np.int64)
        if self.sums is None:
            self.sums = np.zeros(k)
        if self.means is None:
            self.means = np.zeros(k)
        if self.log_weights is None:
            self.log_weights = np.zeros(k)
        if self.r_hat is None:
            self.r_hat = np.zeros(k)

    @property
    def weights(self) -> np.ndarray:
        """EXP3 weights, rescaled so the largest is 1."""
        return np.exp(self.log_weights - self.log_weights.max())

    @property
    def sigma2(self) -> np.ndarray:
        return 1.0 / (self.counts + 1.0)

    def snapshot(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, np.ndarray):
                d[key] = value.tolist()
        return d


def make_policy(kind: str, n_arms: int, rng: np.random.Generator, params: PolicyParams | None = None) -> PolicyState:
    state = PolicyState(kind, n_arms, params or PolicyParams())
    if kind == "static":
        state.fixed_arm = int(rng.integers(n_arms))
    return state


def _argmax(values: np.ndarray) -> int:
    # np.argmax returns the first maximum.
    return int(np.argmax(values))


def egreedy_epsilon(state: PolicyState) -> float:
    p = state.params
    if not p.eps_decay:
        return p.eps0
    return p.eps0 / math.sqrt(max(state.t, 1))


def egreedy_select(state: PolicyState, rng: np.random.Generator) -> int:
    state.t += 1
    eps = egreedy_epsilon(state)
    if rng.random() < eps:
        return int(rng.integers(state.n_arms))
    return _argmax(state.means)


def _record_mean(state: PolicyState, arm: int, reward: float) -> None:
    state.counts[arm] += 1
    state.sums[arm] += reward
    state.means[arm] = state.sums[arm] / state.counts[arm]


def exp3_probabilities(state: PolicyState) -> np.ndarray:
    g = state.params.gamma
    w = np.exp(state.log_weights - state.log_weights.max())
    return (1.0 - g) * w / w.sum() + g / state.n_arms


def exp3_select(state: PolicyState, rng: np.random.Generator) -> tuple[int, float]:
    state.t += 1
    p = exp3_probabilities(state)
    cdf = np.cumsum(p)
    arm = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    arm = min(arm, state.n_arms - 1)
    state.last_prob = float(p[arm])
    return arm, state.last_prob


def exp3_update(state: PolicyState, arm: int, reward: float, p_selected: float) -> None:
    """Importance-weighted update with learning rate eta0/sqrt(t).

    All weights are first raised to the power eta_t/eta_{t-1}; the played arm
    then gains exp(eta_t * reward / p_selected). Weights live in log space.
    """
    if p_selected <= 0:
        raise ValueError("p_selected must be positive")
    eta = state.params.eta0 / math.sqrt(max(state.t, 1))
    ratio = eta / state.eta_prev if state.eta_prev > 0 else 1.0
    r_hat = reward / p_selected
    step = eta * r_hat
    if state.params.exp3_divide_by_k:
        step /= state.n_arms
    lw = state.log_weights * ratio
    lw[arm] += step
    state.log_weights = lw - lw.max()
    state.eta_prev = eta


def ucb_index(state: PolicyState) -> np.ndarray:
    t = state.t
    if not state.params.ucb_count_init_plays:
        t = max(t - state.n_arms, 2)
    return state.means + np.sqrt(2.0 * math.log(t) / state.counts)


def ucb_select(state: PolicyState) -> int:
    state.t += 1
    if state.t <= state.n_arms:
        # Initialization sweep; rounds 1..K play arms 0..K-1.
        return state.t - 1
    unplayed = np.flatnonzero(state.counts == 0)
    if unplayed.size:
        return int(unplayed[0])
    return _argmax(ucb_index(state))


def thompson_select(state: PolicyState, rng: np.random.Generator) -> int:
    state.t += 1
    theta = rng.normal(state.r_hat, np.sqrt(1.0 / (state.counts + 1.0)))
    return _argmax(theta)


def thompson_update(state: PolicyState, arm: int, reward: float) -> None:
    n = state.counts[arm]
    prior_weight = n + 1 if state.params.thompson_update == "posterior" else n
    state.r_hat[arm] = (state.r_hat[arm] * prior_weight + reward) / (n + 2)
    state.counts[arm] = n + 1


def static_select(state: PolicyState) -> int:
    state.t += 1
    return state.fixed_arm


def select(state: PolicyState, rng: np.random.Generator) -> int:
    kind = state.kind
    if kind == "thompson":
        return thompson_select(state, rng)
    if kind == "egreedy":
        return egreedy_select(state, rng)
    if kind == "exp3":
        return exp3_select(state, rng)[0]
    if kind == "ucb":
        return ucb_select(state)
    return static_select(state)


def update(state: PolicyState, arm: int, reward: float) -> None:
    kind = state.kind
    if kind == "thompson":
        thompson_update(state, arm, reward)
    elif kind in ("egreedy", "ucb"):
        _record_mean(state, arm, reward)
    elif kind == "exp3":
        state.counts[arm] += 1
        exp3_update(state, arm, reward, state.last_prob)
