"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in ``RESULTS`` and repeated in the terminal summary by
``conftest.py``; running this file directly executes every criterion in order.
"""

import contextlib
import json
import math
import time

import numpy as np
import pytest
from helpers import GRAD_CASES
from scipy import integrate

from oglab.baselines import HyperParams
from oglab.baselines.iql_cql import random_action_q
from oglab.envs import oracle_bounds
from oglab.errors import VaultError
from oglab.evalstats import (
    NormalizationBounds,
    annotate_table,
    iqm,
    matches_printed,
    normalize,
    published_table,
    student_t_two_sided_p,
)
from oglab.harness import (
    EvalProtocol,
    ExperimentResult,
    JsonlSink,
    RunRecord,
    checkpoint_report,
    evaluate,
    fixed_clock,
    preferred_by_checkpoint,
    run_experiment,
    train_run,
)
from oglab.netcore import grad_check
from oglab.vault import generate_dataset, profile, read_vault, sample_sequences, vault_from_bytes, write_vault

RESULTS: list[str] = []


@contextlib.contextmanager
def criterion(number: int, name: str):
    """Record PASS when the block completes and FAIL (with the reason) otherwise."""
    start = time.perf_counter()
    details: list[str] = []
    try:
        yield details
    except BaseException as e:
        line = f"CRITERION {number} FAIL {name}: {type(e).__name__}: {e} ({time.perf_counter() - start:.1f}s)"
        RESULTS.append(line)
        print(line)
        raise
    line = f"CRITERION {number} PASS {name}: {'; '.join(details)} ({time.perf_counter() - start:.1f}s)"
    RESULTS.append(line)
    print(line)


def t_tail_oracle(t: float, df: float) -> float:
    log_c = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    tail, _ = integrate.quad(lambda x: math.exp(log_c - (df + 1) / 2 * math.log1p(x * x / df)), abs(t), math.inf,
                             epsabs=1e-14, epsrel=1e-12)
    return 2 * tail


class CountingEnv:
    def __init__(self, env):
        self.env = env
        self.spec = env.spec
        self.resets = 0

    def reset(self, seed):
        self.resets += 1
        return self.env.reset(seed)

    def step(self, actions):
        return self.env.step(actions)


# -- 1 ----------------------------------------------------------------------------------------

def test_criterion_1_gradient_correctness():
    with criterion(1, "gradient correctness") as out:
        start = time.perf_counter()
        worst = 0.0
        for case, build in sorted(GRAD_CASES.items()):
            for i in range(20):
                rng = np.random.default_rng(1000 + i)
                params, f = build(rng)
                report = grad_check(f, params, tolerance=1e-4, max_entries=4, rng=rng)
                assert report.passed, f"{case} instance {i}: {report}"
                worst = max(worst, report.max_rel_error)
        elapsed = time.perf_counter() - start
        out.append(f"{len(GRAD_CASES)} topologies x 20 instances, worst relative error {worst:.2e}")
        assert elapsed < 60, f"took {elapsed:.1f}s"


# -- 2 ----------------------------------------------------------------------------------------

def test_criterion_2_star_replication():
    with criterion(2, "meta-review star replication") as out:
        start = time.perf_counter()
        rows = [("smac_omiga", "2c_vs_64zg", "good"), ("smac_omiga", "5m_vs_6m", "good"),
                ("smac_omiga", "corridor", "poor"), ("mpe_omar", "CN", "expert")]
        for name, task, quality in rows:
            table = published_table(name)
            assert matches_printed(table, annotate_table(table), task, quality), f"{task}/{quality}"
        elapsed = time.perf_counter() - start
        out.append(f"{len(rows)}/{len(rows)} rows match")
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


# -- 3 ----------------------------------------------------------------------------------------

def test_criterion_3_statistical_kernels():
    with criterion(3, "statistical kernel accuracy") as out:
        worst = 0.0
        for t in np.arange(0.5, 10.01, 0.5):
            for df in (2, 5, 10, 20, 50):
                err = abs(student_t_two_sided_p(float(t), df) - t_tail_oracle(float(t), df))
                worst = max(worst, err)
        assert worst <= 1e-6, f"max p-value error {worst:.2e}"
        assert iqm([1, 2, 3, 4]) == 2.5
        b = NormalizationBounds(-3.7, 12.9)
        assert normalize(-3.7, b) == 0.0 and normalize(12.9, b) == 100.0
        out.append(f"max p-value error {worst:.1e}; iqm 2.5; endpoints 0 and 100")


# -- 4 ----------------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_4_bc_recovery():
    with criterion(4, "behaviour-cloning recovery") as out:
        vault = generate_dataset("gridspread-3", "good", 3000, 0)
        behaviour = profile(vault).mean_return
        protocol = EvalProtocol(eval_episodes=32, num_seeds=10, update_budget=5000, eval_every=250)
        result = run_experiment("bc", vault, HyperParams.for_algo("bc"), protocol)
        assert not result.failed and len(result.records) == 10
        final = result.aggregate()["final"][0]
        out.append(f"mean final {final:.2f} vs 0.9 x behaviour {behaviour:.2f} = {0.9 * behaviour:.2f}")
        assert final >= 0.9 * behaviour, out[-1]


# -- 5 ----------------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_5_cql_pessimism():
    with criterion(5, "CQL pessimism") as out:
        vault = generate_dataset("gridspread-3", "poor", 1000, 0)
        protocol = EvalProtocol(eval_episodes=4, update_budget=5000, eval_every=5000)
        probe = sample_sequences(vault, 256, None, np.random.default_rng(123))
        means = {}
        for weight in (2.0, 0.0):
            hp = HyperParams.for_algo("iql_cql", cql_weight=weight)
            qs = [random_action_q(train_run("iql_cql", vault, hp, protocol, s).bundle, probe, 10,
                                  np.random.default_rng(7)) for s in range(5)]
            means[weight] = float(np.mean(qs))
        out.append(f"random-action Q {means[2.0]:.3f} (weight 2) vs {means[0.0]:.3f} (weight 0)")
        assert means[2.0] < means[0.0], out[-1]


# -- 6 ----------------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_continuous_pipeline():
    with criterion(6, "continuous-pipeline sanity") as out:
        vault = generate_dataset("pointspread-3", "good", 3000, 0)
        random_mean, expert_mean = oracle_bounds("pointspread-3", 200, 0)
        threshold = random_mean + 0.5 * (expert_mean - random_mean)
        protocol = EvalProtocol(eval_episodes=32, num_seeds=10, update_budget=5000, eval_every=250)
        result = run_experiment("iddpg_bc", vault, HyperParams.for_algo("iddpg_bc"), protocol)
        assert not result.failed and len(result.records) == 10
        final = result.aggregate()["final"][0]
        out.append(f"mean final {final:.2f} vs threshold {threshold:.2f} (random {random_mean:.2f}, "
                   f"expert {expert_mean:.2f})")
        assert final >= threshold, out[-1]


# -- 7 ----------------------------------------------------------------------------------------

FAST = HyperParams(linear_width=8, gru_width=8, critic_widths=(8,), batch_size=4)


def test_criterion_7_protocol_conformance():
    with criterion(7, "protocol conformance") as out:
        vault = generate_dataset("gridspread-3", "medium", 20, 0)
        protocol = EvalProtocol(eval_episodes=32, num_seeds=10, update_budget=40, eval_every=10)
        episodes, mutated = [], []

        def counting(bundle, env, protocol, seed, eval_index):
            env = CountingEnv(env)
            before = bundle.digest()
            value = evaluate(bundle, env, protocol, seed, eval_index)
            episodes.append(env.resets)
            mutated.append(bundle.digest() != before)
            return value

        records = [train_run("bc", vault, FAST, protocol, s, evaluator=counting) for s in range(3)]
        assert all(r.bundle.updates == 40 and r.record.updates == 40 for r in records)
        assert episodes == [32] * 12 and not any(mutated)

        result = run_experiment("bc", vault, FAST, EvalProtocol(eval_episodes=1, num_seeds=10, update_budget=20,
                                                                eval_every=5))
        assert [r.seed for r in result.records] == list(range(10))
        assert all(r.final_return <= r.max_return for r in result.records)
        assert all(r.updates == 20 and r.episodes_evaluated == 4 for r in result.records)

        def garbage(bundle, env, protocol, seed, eval_index):
            return float(np.random.default_rng(eval_index).normal() * 1e6)

        small = EvalProtocol(eval_episodes=2, update_budget=12, eval_every=4)
        honest = train_run("bc", vault, FAST, small, 0)
        perturbed = train_run("bc", vault, FAST, small, 0, evaluator=garbage)
        assert honest.bundle.digest() == perturbed.bundle.digest()
        out.append("budget, 32 episodes per evaluation, 10 seeds, Final <= Max, perturbation-invariant training")


# -- 8 ----------------------------------------------------------------------------------------

def test_criterion_8_determinism_and_formats(tmp_path):
    with criterion(8, "determinism and formats") as out:
        for name in ("a", "b"):
            v = generate_dataset("pointspread-3", "mixed", 9, 5)
            write_vault(tmp_path / f"{name}.vlt", v.header, v.episodes)
            d = tmp_path / name
            train_run("bc", generate_dataset("gridspread-3", "good", 8, 1), FAST,
                      EvalProtocol(eval_episodes=2, update_budget=12, eval_every=4, checkpoints=(6,)), 3,
                      sink=JsonlSink(d / "log.jsonl"), clock=fixed_clock, checkpoint_dir=d / "ckpt")
        blob = (tmp_path / "a.vlt").read_bytes()
        assert blob == (tmp_path / "b.vlt").read_bytes()
        assert (tmp_path / "a" / "log.jsonl").read_bytes() == (tmp_path / "b" / "log.jsonl").read_bytes()
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a" / "ckpt").rglob("*") if p.is_file())
        assert files and all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)

        back = read_vault(tmp_path / "a.vlt")
        write_vault(tmp_path / "c.vlt", back.header, back.episodes)
        assert (tmp_path / "c.vlt").read_bytes() == blob

        head = int.from_bytes(blob[5:9], "little")
        corrupt = {
            "bad_magic": b"XXXX" + blob[4:],
            "unsupported_version": blob[:4] + bytes([99]) + blob[5:],
            "truncated_body": blob[:-3],
            "invalid_header": blob[:9] + b"{" * head + blob[9 + head:],
            "count_mismatch": blob + b"\0" * 4,
        }
        for code, data in corrupt.items():
            with pytest.raises(VaultError) as err:
                vault_from_bytes(data)
            assert err.value.code == code, (code, err.value.code)
        out.append(f"vaults, logs and {len(files)} checkpoint files bit-identical; "
                   f"{len(corrupt)} corruption codes")


# -- 9 ----------------------------------------------------------------------------------------

def test_criterion_9_budget_sensitivity():
    with criterion(9, "budget-sensitivity fixture") as out:
        def result(label, series):
            records = [RunRecord.from_series("h", s, ser) for s, ser in enumerate(series)]
            return ExperimentResult(label, "gridspread-3", "h", EvalProtocol(update_budget=50_000, eval_every=25_000,
                                                                             num_seeds=len(records)), records)

        # fast learner plateaus early; slow learner overtakes it later
        fast = result("fast", [[(25_000, 10.0 + s), (50_000, 11.0 + s)] for s in range(5)])
        slow = result("slow", [[(25_000, 5.0 + s), (50_000, 15.0 + s)] for s in range(5)])
        prefs = preferred_by_checkpoint({"fast": fast, "slow": slow}, [25_000, 50_000])
        assert prefs == {25_000: "fast", 50_000: "slow"}, prefs
        early = [checkpoint_report(r, [25_000])[0].mean for r in (fast, slow)]
        out.append(f"preferred {json.dumps(prefs)}; means at 25k fast {early[0]:.1f}, slow {early[1]:.1f}")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    failed = 0
    for fn in [test_criterion_1_gradient_correctness, test_criterion_2_star_replication,
               test_criterion_3_statistical_kernels, test_criterion_4_bc_recovery, test_criterion_5_cql_pessimism,
               test_criterion_6_continuous_pipeline, test_criterion_7_protocol_conformance,
               test_criterion_8_determinism_and_formats, test_criterion_9_budget_sensitivity]:
        try:
            if fn is test_criterion_8_determinism_and_formats:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except Exception:
            failed += 1
    sys.exit(1 if failed else 0)
