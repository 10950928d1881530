"""Simulation loop: concurrent and sequential (round-robin) learning procedures.

Iterations are 0-based. A WN with activation iteration ``a`` is active for
every iteration ``t >= a``; before that it neither transmits nor learns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import policies
from .channel import Arm, ArmSpace, ChannelModel, LinkBudget, RadioParams
from .geometry import STREAM_INITIAL_ARM, STREAM_POLICY, Deployment, stream
from .policies import PolicyParams, PolicyState


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    wn_id: int
    arm: Arm | None
    active: bool
    throughput_mbps: float
    reward: float | None


@dataclass
class RunResult:
    """Trace of one run, stored column-wise as (iterations, N) arrays.

    ``arms`` holds arm indices (-1 while inactive); ``reward`` is NaN while inactive.
    """

    arms: np.ndarray
    active: np.ndarray
    throughput: np.ndarray
    reward: np.ndarray
    final_states: list[PolicyState]
    arm_space: ArmSpace
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.arms.shape[0]

    @property
    def n_wns(self) -> int:
        return self.arms.shape[1]

    def records(self):
        space = self.arm_space
        for t in range(self.iterations):
            for i in range(self.n_wns):
                on = bool(self.active[t, i])
                yield IterationRecord(
                    iteration=t,
                    wn_id=i,
                    arm=space.arm(self.arms[t, i]) if on else None,
                    active=on,
                    throughput_mbps=float(self.throughput[t, i]),
                    reward=float(self.reward[t, i]) if on else None,
                )

    def aggregate_throughput(self) -> np.ndarray:
        return self.throughput.sum(axis=1)


def step_throughputs(deployment: Deployment, joint_profile, budget: LinkBudget, params: RadioParams,
                     arms: ArmSpace | None = None):
    """Per-WN (throughput Mbps, reward) for one joint profile of arm indices (-1 = inactive)."""
    model = ChannelModel(budget, params, arms or ArmSpace())
    return model.evaluate_batch(np.asarray(joint_profile, dtype=np.int64))


class _Evaluator:
    """Memoized profile evaluation; the channel model is a pure function of the profile."""

    def __init__(self, model: ChannelModel):
        self.model = model
        self.cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    def __call__(self, profile: np.ndarray):
        key = profile.tobytes()
        hit = self.cache.get(key)
        if hit is None:
            hit = self.model.evaluate_batch(profile)
            self.cache[key] = hit
        return hit


def _setup(deployment, policy_kind, iterations, seed, radio, arm_space, policy_params):
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    radio = radio or RadioParams()
    arm_space = arm_space or ArmSpace()
    policy_params = policy_params or PolicyParams()
    model = ChannelModel.from_deployment(deployment, radio, arm_space)
    n = deployment.n_wns
    rngs = [stream(seed, STREAM_POLICY, i) for i in range(n)]
    states = [policies.make_policy(policy_kind, arm_space.size, rngs[i], policy_params) for i in range(n)]
    config = {
        "policy": policy_kind,
        "iterations": iterations,
        "radio": radio,
        "arm_space": arm_space,
        "policy_params": policy_params,
        "activations": deployment.activations.tolist(),
        "deployment_seed": deployment.seed,
    }
    return model, rngs, states, config, arm_space


def run_concurrent(deployment: Deployment, policy_kind: str, iterations: int, seed: int, *,
                   radio: RadioParams | None = None, arm_space: ArmSpace | None = None,
                   policy_params: PolicyParams | None = None) -> RunResult:
    """Every active WN selects, the joint profile is evaluated once, every active WN updates."""
    model, rngs, states, config, arm_space = _setup(
        deployment, policy_kind, iterations, seed, radio, arm_space, policy_params)
    n = deployment.n_wns
    evaluate = _Evaluator(model)
    activation = deployment.activations
    arms = np.full((iterations, n), -1, dtype=np.int64)
    tpt = np.zeros((iterations, n))
    rew = np.full((iterations, n), np.nan)
    select, update = policies.select, policies.update
    profile = np.full(n, -1, dtype=np.int64)
    for t in range(iterations):
        live = [i for i in range(n) if activation[i] <= t]
        for i in live:
            profile[i] = select(states[i], rngs[i])
        g, r = evaluate(profile)
        for i in live:
            update(states[i], int(profile[i]), float(r[i]))
        arms[t] = profile
        tpt[t] = g
        rew[t] = r
    config["mode"] = "concurrent"
    return RunResult(arms, arms >= 0, tpt, rew, states, arm_space, seed, config)


def run_sequential(deployment: Deployment, policy_kind: str, iterations: int, seed: int, *,
                   radio: RadioParams | None = None, arm_space: ArmSpace | None = None,
                   policy_params: PolicyParams | None = None) -> RunResult:
    """Round-robin turns over active WNs in wn_id order, one decision per iteration.

    On its turn a WN first learns from the mean reward observed since its
    previous turn, then picks a new arm. Until its first turn an active WN
    transmits on a uniformly drawn initial arm that it does not learn from.
    Pending observations are flushed into the policies when the run ends.
    """
    model, rngs, states, config, arm_space = _setup(
        deployment, policy_kind, iterations, seed, radio, arm_space, policy_params)
    n = deployment.n_wns
    evaluate = _Evaluator(model)
    activation = deployment.activations
    # A static WN keeps its fixed arm from activation on; learners start on a seeded uniform draw.
    initial = [states[i].fixed_arm if policy_kind == "static"
               else int(stream(seed, STREAM_INITIAL_ARM, i).integers(arm_space.size)) for i in range(n)]
    arms = np.full((iterations, n), -1, dtype=np.int64)
    tpt = np.zeros((iterations, n))
    rew = np.full((iterations, n), np.nan)
    profile = np.full(n, -1, dtype=np.int64)
    had_turn = [False] * n
    pending_sum = [0.0] * n
    pending_count = [0] * n
    cursor = 0
    for t in range(iterations):
        for i in range(n):
            if activation[i] == t:
                profile[i] = initial[i]
        turn = -1
        for k in range(n):
            cand = (cursor + k) % n
            if activation[cand] <= t:
                turn = cand
                break
        if turn >= 0:
            if had_turn[turn] and pending_count[turn]:
                policies.update(states[turn], int(profile[turn]), pending_sum[turn] / pending_count[turn])
            pending_sum[turn], pending_count[turn] = 0.0, 0
            profile[turn] = policies.select(states[turn], rngs[turn])
            had_turn[turn] = True
            cursor = turn + 1
        g, r = evaluate(profile)
        for i in range(n):
            if profile[i] >= 0:
                pending_sum[i] += float(r[i])
                pending_count[i] += 1
        arms[t] = profile
        tpt[t] = g
        rew[t] = r
    for i in range(n):
        if had_turn[i] and pending_count[i]:
            policies.update(states[i], int(profile[i]), pending_sum[i] / pending_count[i])
    config["mode"] = "sequential"
    return RunResult(arms, arms >= 0, tpt, rew, states, arm_space, seed, config)


def run(deployment: Deployment, policy_kind: str, mode: str, iterations: int, seed: int, **kwargs) -> RunResult:
    if mode == "concurrent":
        return run_concurrent(deployment, policy_kind, iterations, seed, **kwargs)
    if mode == "sequential":
        return run_sequential(deployment, policy_kind, iterations, seed, **kwargs)
    raise ValueError(f"unknown mode {mode!r}")
