"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting. Runtime budgets are asserted alongside the functional checks.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

import reference
from spatial_reuse import policies as P
from spatial_reuse.channel import ChannelModel, RadioParams, dbm_to_mw, path_loss_db, sinr, throughput_mbps
from spatial_reuse.geometry import build_dynamic, build_grid, build_random
from spatial_reuse.harness import ExperimentConfig, run_experiment
from spatial_reuse.oracle import brute_force, empirical_regret
from spatial_reuse.orchestrator import run, run_concurrent
from spatial_reuse.policies import PolicyParams, make_policy

RESULTS = {}

LEARNERS = ("egreedy", "exp3", "ucb", "thompson")
LATE = slice(2500, 10_000)  # iterations 2,501..10,000 in 1-based numbering


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_criterion_1_formula_oracles():
    t0 = time.perf_counter()
    errs = {}
    p = RadioParams()
    # independent values from a 50-digit mpmath evaluation
    errs["path_loss"] = [
        _rel(path_loss_db(math.sqrt(2), 9.5, 30.0, p), 29.005881287518194),
        _rel(path_loss_db(5.0, 0.0, 30.0, p), 62.95880017344075),
        _rel(path_loss_db(3.0, 2.0, 10.0, RadioParams(alpha=3.0)), 27.313637641589873),
    ]
    i2 = 10 * math.log10(dbm_to_mw(-90.0) + dbm_to_mw(-95.0))
    errs["sinr"] = [
        _rel(sinr(-50.0, -80.0, -100.0), 990.0990099009901),
        _rel(sinr(-60.0, i2, -100.0), 706.1011116965424),
        _rel(sinr(-70.0, -math.inf, -100.0), 1000.0),
    ]
    errs["throughput"] = [
        _rel(throughput_mbps(1e7, 20.0), 465.0699361696207),
        _rel(throughput_mbps(3.5, 40.0), 86.79700005769249),
        _rel(throughput_mbps(0.25, 20.0), 6.438561897747247),
    ]
    ucb = make_policy("ucb", 2, np.random.default_rng(0))
    ucb.t, ucb.counts[:], ucb.means[:] = 5, [2, 2], [0.5, 0.9]
    ia, ib = P.ucb_index(ucb)
    ucb.t, ucb.counts[:], ucb.means[:] = 10, [3, 3], [0.2, 0.2]
    ic = P.ucb_index(ucb)[0]
    errs["ucb"] = [_rel(ia, 1.7686362411795197), _rel(ib, 2.1686362411795197), _rel(ic, 1.438974062949946)]

    e = make_policy("exp3", 2, np.random.default_rng(0))
    e.t = 1
    P.exp3_update(e, 0, 0.36, 0.5)  # log-weight of arm 0: 0.1 * 0.36 / 0.5 = 0.072
    p1 = P.exp3_probabilities(e)
    case_a = _rel(p1[0], math.exp(0.072) / (math.exp(0.072) + 1))
    e.log_weights, e.eta_prev, e.t = np.array([0.72, 0.0]), 0.1, 2
    P.exp3_update(e, 1, 0.3, 0.2)
    case_b = _rel(e.log_weights[0] - e.log_weights[1], 0.5091168824543142 - 0.10606601717798213)
    g = make_policy("exp3", 4, np.random.default_rng(0), PolicyParams(gamma=0.2))
    g.log_weights = np.array([math.log(2.054433210643888), 0.0, 0.0, 0.0])  # weight e^0.72
    pg = P.exp3_probabilities(g)
    case_c = _rel(pg[0], 0.8 * 2.054433210643888 / (2.054433210643888 + 3) + 0.05)
    errs["exp3"] = [case_a, case_b, case_c]

    th = make_policy("thompson", 3, np.random.default_rng(0))
    P.thompson_update(th, 0, 0.6)
    a = th.r_hat[0]
    P.thompson_update(th, 0, 0.9)
    b = th.r_hat[0]
    for r in (0.1, 0.4):
        P.thompson_update(th, 1, r)
    c = th.r_hat[1]
    errs["thompson"] = [_rel(a, 0.3), _rel(b, 0.5), _rel(c, 0.5 / 3)]
    elapsed = time.perf_counter() - t0

    worst = max(max(v) for v in errs.values())
    ok = worst < 1e-9 and elapsed < 1.0 and all(len(v) >= 3 for v in errs.values())
    report(1, ok, f"worst rel err {worst:.2e} over {sum(map(len, errs.values()))} cases, {elapsed:.3f}s")
    assert ok


def test_criterion_2_reward_bound_fuzz():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    total, bad, bad_sinr = 0, 0, 0
    for scen in range(20):
        n = int(rng.integers(2, 9))
        dep = build_random(n_wns=n, seed=10_000 + scen)
        profiles = rng.integers(-1, 12, size=(5000, n))
        total += profiles.shape[0]
        on = profiles >= 0
        for ref in ("own", "max"):
            model = ChannelModel.from_deployment(dep, RadioParams(reference_power=ref))
            tpt, rew = model.evaluate_batch(profiles)
            r = rew[on]
            bad += int(np.sum((r < 0) | (r > 1.0) | np.isnan(r)))
            # SINR recovered from throughput versus SNR of the same arm in isolation
            s = 2.0 ** (tpt / model.params.bandwidth_mhz) - 1.0
            pw = np.where(on, profiles, 0) % model.arms.n_powers
            snr = 2.0 ** (model.isolation_mbps[pw, np.arange(n)] / model.params.bandwidth_mhz) - 1.0
            bad_sinr += int(np.sum(s[on] > snr[on] * (1 + 1e-12)))
    elapsed = time.perf_counter() - t0
    ok = total >= 100_000 and bad == 0 and bad_sinr == 0 and elapsed < 10.0
    report(2, ok, f"{total} profiles, each under own- and max-power normalization: {bad} rewards "
                  f"outside [0,1], {bad_sinr} with SINR > SNR, {elapsed:.2f}s")
    assert ok


def test_criterion_3_exhaustive_oracle_equivalence():
    t0 = time.perf_counter()
    checks = []
    for dep in (build_random(n_wns=2, seed=7), build_grid(seed=1)):
        model = ChannelModel.from_deployment(dep)
        for objective in ("proportional_fair", "max_aggregate"):
            a = brute_force(model, objective, order="lexicographic")
            b = brute_force(model, objective, order="shuffled", seed=11)
            checks.append(a.best_indices == b.best_indices and a.objective_value == b.objective_value)
            assert a.profiles_evaluated == 12 ** dep.n_wns
        pf = brute_force(model, "proportional_fair", order="reverse")
        rng = np.random.default_rng(3)
        tpt, _ = model.evaluate_batch(rng.integers(12, size=(1000, dep.n_wns)))
        checks.append(bool(np.all(np.log(tpt).sum(axis=1) <= pf.objective_value + 1e-12)))
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < 5.0
    report(3, ok, f"{sum(checks)}/{len(checks)} equivalence checks, {elapsed:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def grid_runs():
    """Fixed-seed grid: every learner in both modes, run seeds 1..20."""
    t0 = time.perf_counter()
    dep = build_grid(seed=1)
    out = {}
    for kind in LEARNERS:
        for mode in ("concurrent", "sequential"):
            if mode == "sequential" and kind != "thompson":
                continue
            out[kind, mode] = [run(dep, kind, mode, 10_000, seed) for seed in range(1, 21)]
    out["elapsed"] = time.perf_counter() - t0
    out["pf"] = brute_force(ChannelModel.from_deployment(dep))
    return out


@pytest.mark.slow
def test_criterion_4_policies_reach_pf_and_thompson_leads(grid_runs):
    pf_agg = grid_runs["pf"].aggregate_mbps
    frac = {k: float(np.mean([r.throughput[LATE].sum(axis=1).mean() for r in grid_runs[k, "concurrent"]]))
            / pf_agg for k in LEARNERS}
    best = max(frac, key=frac.get)
    ok = all(v >= 0.8 for v in frac.values()) and best == "thompson" and grid_runs["elapsed"] < 300
    detail = ", ".join(f"{k} {v:.3f}" for k, v in frac.items())
    report(4, ok, f"fraction of PF aggregate ({pf_agg:.1f} Mbps): {detail}; best {best}")
    assert ok


@pytest.mark.slow
def test_criterion_5_sequential_thompson_is_steadier(grid_runs):
    def temporal_std(runs):
        return float(np.mean([np.mean(np.std(r.throughput[LATE], axis=0)) for r in runs]))

    def mean_tpt(runs):
        return float(np.mean([r.throughput[LATE].mean() for r in runs]))

    con, seq = grid_runs["thompson", "concurrent"], grid_runs["thompson", "sequential"]
    s_con, s_seq = temporal_std(con), temporal_std(seq)
    m_con, m_seq = mean_tpt(con), mean_tpt(seq)
    gap = abs(m_seq - m_con) / m_con
    ok = s_seq < s_con and gap <= 0.15
    report(5, ok, f"temporal std seq {s_seq:.1f} vs conc {s_con:.1f} Mbps; mean seq {m_seq:.1f} "
                  f"vs conc {m_con:.1f} Mbps ({gap:.1%} apart)")
    assert ok


@pytest.mark.slow
def test_criterion_6_learners_beat_static_on_random_scenarios():
    means = {}
    for n in (2, 4):
        deps = [build_random(n_wns=n, seed=s) for s in range(1, 51)]
        for kind in ("static",) + LEARNERS:
            means[n, kind] = float(np.mean([run_concurrent(d, kind, 10_000, i + 1).throughput[LATE].mean()
                                            for i, d in enumerate(deps)]))
    ok = all(means[n, k] > means[n, "static"] for n in (2, 4) for k in LEARNERS)
    detail = "; ".join(f"N={n}: " + ", ".join(f"{k} {means[n, k]:.1f}" for k in ("static",) + LEARNERS)
                       for n in (2, 4))
    report(6, ok, f"mean Mbps per WN over 50 scenarios, {detail}")
    assert ok


@pytest.mark.slow
def test_criterion_7_dynamic_regime_changes_and_restabilization():
    dep = build_dynamic(seed=1)
    lines, ok = [], True
    for mode in ("concurrent", "sequential"):
        runs = [run(dep, "thompson", mode, 10_000, seed) for seed in range(1, 21)]
        agg = np.array([r.throughput.sum(axis=1) for r in runs])
        pvals = []
        for t in (2500, 5000):
            before, after = agg[:, t - 500:t].mean(axis=1), agg[:, t:t + 500].mean(axis=1)
            pvals.append(stats.ttest_rel(after, before).pvalue)
        early = np.mean([np.nanmean(np.nanstd(r.reward[5000:7000], axis=0)) for r in runs])
        late = np.mean([np.nanmean(np.nanstd(r.reward[8000:10_000], axis=0)) for r in runs])
        ok &= all(p < 0.01 for p in pvals) and late < early
        lines.append(f"{mode}: p={pvals[0]:.1e}/{pvals[1]:.1e}, reward std {early:.3f} -> {late:.3f}")
    report(7, ok, "; ".join(lines))
    assert ok


def test_criterion_8_determinism(tmp_path):
    def cfg(out, workers):
        return ExperimentConfig(scenario="random", n_wns=(2, 3), policy=("exp3", "thompson"),
                                mode=("concurrent", "sequential"), iterations=400, reps=3, seed=9,
                                trace=True, oracle=True, histogram=True, out=str(out), workers=workers)

    dirs = [tmp_path / "a", tmp_path / "b", tmp_path / "pool"]
    run_experiment(cfg(dirs[0], 1))
    run_experiment(cfg(dirs[1], 1))
    run_experiment(cfg(dirs[2], 2))
    names = sorted(p.name for p in dirs[0].iterdir())
    same = all(sorted(p.name for p in d.iterdir()) == names for d in dirs[1:])
    diffs = [n for n in names for d in dirs[1:] if (dirs[0] / n).read_bytes() != (d / n).read_bytes()]
    ok = same and not diffs and len(names) > 20
    report(8, ok, f"{len(names)} files compared across 2 serial runs and 1 two-worker run, {len(diffs)} differ")
    assert ok


def test_criterion_9_isolated_wn_regret():
    dep = build_random(n_wns=1, seed=21)
    model = ChannelModel.from_deployment(dep)
    lines, ok = [], True
    for kind in P.KINDS:
        trace = run_concurrent(dep, kind, 10, seed=5)
        regret, _ = empirical_regret(trace, model)
        # replay oracle: each fixed arm against the (empty) opponent log, scalar reference evaluator
        totals = [sum(reference.evaluate(dep, [k])[1][0] for _ in range(10)) for k in range(12)]
        got = sum(reference.evaluate(dep, [int(a)])[1][0] for a in trace.arms[:, 0])
        replay = max(totals) - got
        explore = {"egreedy": 10, "ucb": 10}.get(kind, 0)  # forced plays within a 10-step horizon
        final = float(regret[0, -1])
        agree = abs(final - replay) <= 1e-9
        if kind == "static":
            good = final == 0.0
        else:
            good = abs(final) <= 1e-9 and final <= explore
        ok &= agree and good
        lines.append(f"{kind} {final:.2g}")
    report(9, ok, "final regret after 10 iterations: " + ", ".join(lines))
    assert ok
