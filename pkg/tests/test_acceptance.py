"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from sprl.cli import build_parser
from sprl.curriculum import PaceConfig, delta, gamma, gamma_max, select_confident
from sprl.data import read_numeric_csv
from sprl.experiment import run_experiment, uniformization_run
from sprl.losses import (bootstrap_hard_loss, cross_entropy, kd_loss, label_smooth_loss,
                         prop1_step, resistance_loss, sprl_batch_loss)
from sprl.noise import apply_noise, pair_matrix, symmetric_matrix
from sprl.numeric import make_rng

LN10 = math.log(10)

# noisy blobs benchmark shared by criteria 7, 9 and 11
BENCH = ["--dataset", "blobs", "--blobs-n", "2000", "--blobs-c", "4", "--blobs-d", "20",
         "--separation", "4.0", "--epochs", "200", "--t1", "20", "--gamma-d", "300", "--seed", "1"]


def report(number, title, passed, detail, elapsed=None):
    status = "PASS" if passed else "FAIL"
    timing = "" if elapsed is None else f" ({elapsed:.1f}s)"
    line = f"criterion {number} {status} {title}: {detail}{timing}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def _run(tmp_path, name, *flags):
    args = build_parser().parse_args([*flags, "--out", str(tmp_path / name)])
    return {s.method: s for s in run_experiment(args)}


@pytest.fixture(scope="module")
def noisy_bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    t0 = time.perf_counter()
    runs = _run(root, "a", *BENCH, "--noise", "symmetric", "--rate", "0.5",
                "--method", "sprl,standard,kd,label_smooth")
    return root, runs, time.perf_counter() - t0


def test_criterion_1_resistance_loss_asymptote():
    t0 = time.perf_counter()
    _, res = uniformization_run(n=1000, c=10, ce_epochs=100, resistance_epochs=200)
    elapsed = time.perf_counter() - t0
    final = res[-1]
    ok = abs(final - LN10) <= 0.05 and elapsed < 180
    report(1, "resistance loss asymptote", ok,
           f"final mean resistance loss {final:.4f} vs ln10 {LN10:.4f} (tol 0.05)", elapsed)


def test_criterion_2_proposition_enumeration():
    t0 = time.perf_counter()
    rng = make_rng(2024, "probe")
    violations = 0
    seen = {"i": 0, "ii": 0, "iii": 0}
    slack = 1e-12
    for _ in range(100_000):
        c = int(rng.integers(2, 11))
        prev, cur = rng.dirichlet(np.ones(c)), rng.dirichlet(np.ones(c))
        if cur[0] < cur[1]:
            prev[[0, 1]], cur[[0, 1]] = prev[[1, 0]], cur[[1, 0]]
        eta = 1.0 - rng.random()
        nxt, case = prop1_step(prev, cur, eta)
        # independent recomputation of the update and of the case split
        expect = cur + eta * prev / cur
        rp, rc = prev[0] / prev[1], cur[0] / cur[1]
        rn = expect[0] / expect[1]
        want = "i" if rp < rc else ("ii" if rp > rc ** 2 else "iii")
        seen[want] += 1
        if want == "i":
            ok = rn < rc * (1 + slack)
        elif want == "ii":
            ok = rc * (1 - slack) < rn < rp * (1 + slack)
        else:
            ok = rn <= rc * (1 + slack)
        ok = ok and case == want and np.allclose(nxt, expect, rtol=1e-15, atol=0)
        violations += not ok
    elapsed = time.perf_counter() - t0
    report(2, "three-case ratio inequalities", violations == 0 and elapsed < 10,
           f"{violations} violations over 100000 triples, cases {seen}", elapsed)


def _fd(fn, x, h=1e-6):
    out = np.zeros_like(x)
    flat, g = x.reshape(-1), out.reshape(-1)
    for j in range(flat.size):
        e = np.zeros_like(flat)
        e[j] = h
        g[j] = (fn((flat + e).reshape(x.shape)) - fn((flat - e).reshape(x.shape))) / (2 * h)
    return out


def _rel_err(a, n):
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)))


def test_criterion_3_gradient_correctness():
    t0 = time.perf_counter()
    rng = make_rng(31, "probe")
    worst = {k: 0.0 for k in ("ce", "resistance", "sprl", "kd", "label_smooth", "bootstrap")}
    for name in worst:
        probes = 0
        while probes < 100:
            c = int(rng.integers(2, 11))
            B = int(rng.integers(1, 6)) if name == "sprl" else 1
            p = 0.05 + 0.95 * rng.dirichlet(np.ones(c), size=B)
            p /= p.sum(axis=1, keepdims=True)
            prev = rng.dirichlet(np.ones(c), size=B)
            y = rng.integers(0, c, B)
            if name == "bootstrap" and np.diff(np.sort(p[0])[-2:])[0] < 1e-4:
                continue
            fn = {
                "ce": lambda q: cross_entropy(q[0], y[0]),
                "resistance": lambda q: resistance_loss(q[0], prev[0]),
                "kd": lambda q: kd_loss(q[0], prev[0]),
                "label_smooth": lambda q: label_smooth_loss(q[0]),
                "bootstrap": lambda q: bootstrap_hard_loss(q[0], y[0], 0.8),
                "sprl": lambda q: sprl_batch_loss(q, prev, y, v, 1.7),
            }[name]
            v = rng.integers(0, 2, B)
            analytic = np.asarray(fn(p)[1]).reshape(p.shape)
            numeric = _fd(lambda q: float(fn(q)[0]), p)
            worst[name] = max(worst[name], _rel_err(analytic, numeric))
            probes += 1
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-5 and elapsed < 30
    report(3, "loss gradients vs central differences", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (max rel err, tol 1e-5)", elapsed)


def test_criterion_4_noise_fidelity():
    t0 = time.perf_counter()
    y = np.arange(10_000) % 10
    sym = apply_noise(y, symmetric_matrix(10, 0.5), 4)
    sym_rate = float(np.mean(sym != y))
    pair = apply_noise(y, pair_matrix(10, 0.45), 4)
    flipped = pair != y
    successor_only = bool(np.all(pair[flipped] == (y[flipped] + 1) % 10))
    pair_rate = float(np.mean(flipped))
    elapsed = time.perf_counter() - t0
    ok = abs(sym_rate - 0.5) <= 0.015 and abs(pair_rate - 0.45) <= 0.015 and successor_only \
        and elapsed < 5
    report(4, "noise model fidelity", ok,
           f"symmetric rate {sym_rate:.4f}, pair rate {pair_rate:.4f}, "
           f"successor only {successor_only}", elapsed)


def test_criterion_5_selection_oracle():
    t0 = time.perf_counter()
    rng = make_rng(5, "probe")
    bad = 0
    for _ in range(50):
        losses = rng.exponential(size=1000)
        count = int(rng.integers(0, 1001))
        v, _ = select_confident(losses, count)
        oracle = sorted(range(1000), key=lambda i: (losses[i], i))[:count]
        bad += set(np.flatnonzero(v).tolist()) != set(oracle) or int(v.sum()) != count
    elapsed = time.perf_counter() - t0
    report(5, "selection oracle", bad == 0 and elapsed < 5, f"{bad}/50 instances differ", elapsed)


def test_criterion_6_schedule_oracle():
    t0 = time.perf_counter()
    bad = []
    configs = [(1000, 300, 10, 20, 200, 10.0), (2000, 1000, 10, 20, 200, 300.0),
               (1600, 160, 10, 5, 200, 1.0), (1000, 500, 20, 40, 300, 5.0),
               (500, 100, 5, 10, 60, 2.0)]
    for n, m, K, T1, T, gd in configs:
        cfg = PaceConfig(n=n, T1=T1, T=T, K=K, m=m, gamma_d=gd)
        step = (T - T1) * n // (K * n - m * K + n)
        top = gd * (10 - -(-10 * m // n))
        ds = [delta(t, cfg) for t in range(1, T + 1)]
        gs = [gamma(t, cfg) for t in range(1, T + 1)]
        for t in range(1, T + 1):
            want_d = n if t <= T1 else min(m + ((t - T1) // step) * (n // K), n)
            want_g = 0.0 if t <= T1 else top * math.exp(-5 * (1 - (t - T1) / (T - T1)) ** 2)
            if ds[t - 1] != want_d or abs(gs[t - 1] - want_g) > 1e-12 * max(top, 1):
                bad.append((n, t))
        tail = ds[T1:]  # non-decreasing on (T1, T]
        if any(a > b for a, b in zip(tail, tail[1:])):
            bad.append((n, "delta decreases"))
        if (m * K) % n == 0 and ds[-1] != n:
            bad.append((n, "delta(T) != n"))
        if gs[-1] != top or gamma_max(gd, m, n) != top:
            bad.append((n, "gamma(T) != gamma_max"))
    elapsed = time.perf_counter() - t0
    report(6, "schedule oracle", not bad and elapsed < 1,
           f"{len(configs)} configs, mismatches {bad[:3]}", elapsed)


def _accs(root, summary):
    return read_numeric_csv(root / "a" / summary.per_epoch_csv_path)[1][:, 2]


def test_criterion_7_no_deterioration(noisy_bench):
    root, runs, elapsed = noisy_bench
    std, sprl = runs["standard"], runs["sprl"]
    gap_std = std.max_acc - std.last10_avg_acc
    gap_sprl = sprl.max_acc - sprl.last10_avg_acc
    lift = sprl.last10_avg_acc - std.last10_avg_acc
    ok = gap_std >= 0.10 and gap_sprl <= 0.03 and lift >= 0.10
    report(7, "no deterioration under 50% symmetric noise", ok,
           f"standard max {std.max_acc:.4f} last10 {std.last10_avg_acc:.4f} (gap {gap_std:.4f} >= 0.10); "
           f"sprl max {sprl.max_acc:.4f} last10 {sprl.last10_avg_acc:.4f} (gap {gap_sprl:.4f} <= 0.03); "
           f"lift {lift:.4f} >= 0.10", elapsed)


def test_criterion_8_clean_data(tmp_path):
    t0 = time.perf_counter()
    runs = _run(tmp_path, "clean", *BENCH, "--noise", "none", "--method", "sprl,standard")
    elapsed = time.perf_counter() - t0
    diff = runs["sprl"].last10_avg_acc - runs["standard"].last10_avg_acc
    report(8, "clean-data non-regression", abs(diff) <= 0.02 and elapsed < 300,
           f"sprl last10 {runs['sprl'].last10_avg_acc:.4f}, standard "
           f"{runs['standard'].last10_avg_acc:.4f}, diff {diff:+.4f} (tol 0.02)", elapsed)


def test_criterion_9_substitution_ordering(noisy_bench):
    _, runs, _ = noisy_bench
    s, kd, ls = (runs[m].last10_avg_acc for m in ("sprl", "kd", "label_smooth"))
    report(9, "resistance term vs substitutes", s >= kd and s >= ls,
           f"sprl {s:.4f} >= kd {kd:.4f} and >= label_smooth {ls:.4f}")


def test_criterion_10_model_generated_noise(tmp_path):
    t0 = time.perf_counter()
    rows = []
    for seed in (1, 2, 3):
        runs = _run(tmp_path, f"model{seed}", "--dataset", "blobs", "--separation", "2.0",
                    "--noise", "model", "--weak-fraction", "0.1", "--t1", "5", "--gamma-d", "300",
                    "--seed", str(seed), "--method", "sprl,standard")
        rows.append((runs["sprl"].last10_avg_acc, runs["standard"].last10_avg_acc,
                     runs["sprl"].weak_model_acc, runs["sprl"].final_noise_rate_realized))
    elapsed = time.perf_counter() - t0
    sprl, std, weak, rate = (np.mean(col) for col in zip(*rows))
    gain = sprl - std
    ok = gain >= 0.02 and all(a > w for a, _, w, _ in rows)
    per_seed = "; ".join(f"seed {i + 1}: sprl {a:.4f} std {b:.4f} weak {w:.4f} noise {r:.3f}"
                         for i, (a, b, w, r) in enumerate(rows))
    report(10, "model-generated noise", ok,
           f"mean over 3 seeds sprl {sprl:.4f} - standard {std:.4f} = {gain:+.4f} (>= 0.02), "
           f"sprl above weak model on every seed (mean weak {weak:.4f}) [{per_seed}]", elapsed)


def test_criterion_11_determinism(noisy_bench, tmp_path):
    root, _, _ = noisy_bench
    t0 = time.perf_counter()
    _run(tmp_path, "a", *BENCH, "--noise", "symmetric", "--rate", "0.5",
         "--method", "sprl,standard,kd,label_smooth")
    elapsed = time.perf_counter() - t0
    first = sorted(p.relative_to(root / "a") for p in (root / "a").rglob("*.csv"))
    second = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    same = first == second and all(
        (root / "a" / p).read_bytes() == (tmp_path / "a" / p).read_bytes() for p in first)
    report(11, "determinism", same and len(first) == 5,
           f"{len(first)} CSV files compared byte for byte, identical {same}", elapsed)
