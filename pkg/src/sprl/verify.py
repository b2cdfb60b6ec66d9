"""Self-check suite: numeric properties of the losses, schedules, noise and selection.

Each registered property is a function returning ``(passed, detail)``. The
report has one line per property, ``PASS name detail`` or ``FAIL name detail``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import curriculum as cur
from . import losses as L
from .curriculum import PaceConfig
from .noise import apply_noise, pair_matrix, symmetric_matrix
from .numeric import backward, forward, grad_check, init_params, make_rng

GRAD_TOL = 1e-5
SLACK = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} {self.detail}"


def default_losses() -> dict:
    """The loss functions the gradient checks exercise; overridable for mutation tests."""
    return {"ce": L.cross_entropy, "resistance": L.resistance_loss, "kd": L.kd_loss,
            "label_smooth": L.label_smooth_loss, "bootstrap": L.bootstrap_hard_loss}


def _simplex(rng, c):
    p = 0.05 + 0.95 * rng.dirichlet(np.ones(c))
    return p / p.sum()


def _fd_rel_err(fn, p, grad, h=1e-6):
    num = np.zeros_like(p)
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = h
        num[j] = (fn(p + e) - fn(p - e)) / (2 * h)
    return float(np.max(np.abs(grad - num) / np.maximum(np.maximum(np.abs(grad), np.abs(num)), 1e-6)))


def _loss_grad_check(name, fns, probes=100, seed=0):
    rng = make_rng(seed, "probe")
    worst = 0.0
    done = 0
    while done < probes:
        c = int(rng.integers(2, 11))
        p = _simplex(rng, c)
        prev = rng.dirichlet(np.ones(c))
        y = int(rng.integers(c))
        if name == "bootstrap":
            top = np.sort(p)
            if top[-1] - top[-2] < 1e-4:
                continue  # argmax target would flip inside the stencil
            fn = lambda q: fns["bootstrap"](q, y, 0.8)
        elif name == "ce":
            fn = lambda q: fns["ce"](q, y)
        elif name == "label_smooth":
            fn = fns["label_smooth"]
        else:
            fn = lambda q, f=fns[name]: f(q, prev)
        worst = max(worst, _fd_rel_err(lambda q: float(fn(q)[0]), p, fn(p)[1]))
        done += 1
    return worst < GRAD_TOL, f"max_rel_err={worst:.3e} probes={probes}"


def _combined_grad_check(fns, probes=100, seed=1):
    """Whole-batch SPRL objective as a function of the batch probability matrix."""
    rng = make_rng(seed, "probe")
    worst = 0.0
    for _ in range(probes):
        B, c = int(rng.integers(1, 6)), int(rng.integers(2, 8))
        p = np.stack([_simplex(rng, c) for _ in range(B)])
        prev = rng.dirichlet(np.ones(c), size=B)
        y = rng.integers(0, c, B)
        v = rng.integers(0, 2, B)
        gamma_t = float(rng.uniform(0, 5))

        def fn(q):
            ce, ce_g = fns["ce"](q, y)
            r, r_g = fns["resistance"](q, prev)
            n_sel = v.sum()
            value = (ce[v == 1].sum() / n_sel if n_sel else 0.0) + gamma_t * r.sum() / B
            grad = gamma_t * r_g / B
            if n_sel:
                grad = grad + (v[:, None] * ce_g) / n_sel
            return value, grad

        flat = p.ravel()
        worst = max(worst, _fd_rel_err(lambda f: fn(f.reshape(B, c))[0], flat, fn(p)[1].ravel()))
    return worst < GRAD_TOL, f"max_rel_err={worst:.3e} probes={probes}"


def _network_grad_check(fns, probes=100, seed=2):
    rng = make_rng(seed, "probe")
    params = init_params(6, 4, (10, 7), "leaky_relu", rng=rng)
    x = rng.normal(size=(9, 6))
    y = rng.integers(0, 4, 9)
    prev = rng.dirichlet(np.ones(4), size=9)
    v = np.array([1, 0, 1, 1, 0, 1, 0, 1, 1])

    def loss_and_grad(_arrays):
        p, cache = forward(params, x)
        ce, ce_g = fns["ce"](p, y)
        r, r_g = fns["resistance"](p, prev)
        value = ce[v == 1].sum() / v.sum() + 2.0 * r.sum() / 9
        grad = v[:, None] * ce_g / v.sum() + 2.0 * r_g / 9
        return value, backward(params, cache, grad).arrays()

    err = grad_check(loss_and_grad, params.arrays(), probe_count=probes, rng=rng)
    return err < GRAD_TOL, f"max_rel_err={err:.3e} probes={probes}"


def ratio_step_enumeration(count: int = 100_000, seed: int = 0, slack: float = SLACK):
    """Random (prev, cur, eta) triples; checks the per-case ratio inequalities.

    Returns ``(violations, case_counts)``.
    """
    rng = make_rng(seed, "probe")
    counts = {"i": 0, "ii": 0, "iii": 0}
    violations = 0
    for _ in range(count):
        c = int(rng.integers(2, 11))
        prev, curr = rng.dirichlet(np.ones(c)), rng.dirichlet(np.ones(c))
        if curr[0] == curr[1]:
            continue
        if curr[0] < curr[1]:
            prev[[0, 1]] = prev[[1, 0]]
            curr[[0, 1]] = curr[[1, 0]]
        eta = 1.0 - rng.random()
        nxt, case = L.prop1_step(prev, curr, eta)
        rp, rc, rn = prev[0] / prev[1], curr[0] / curr[1], nxt[0] / nxt[1]
        counts[case] += 1
        if case == "i":
            ok = rn < rc * (1 + slack)
        elif case == "ii":
            ok = rc * (1 - slack) < rn < rp * (1 + slack)
        else:
            ok = rn <= rc * (1 + slack) and rc <= rp * (1 + slack) and rp <= rc * rc * (1 + slack)
        violations += not ok
    return violations, counts


def _ratio_step():
    bad, counts = ratio_step_enumeration()
    detail = "violations={} cases=i:{} ii:{} iii:{}".format(bad, counts["i"], counts["ii"], counts["iii"])
    return bad == 0, detail


def _noise_symmetric():
    n = 10_000
    y = np.arange(n) % 10
    rate = float(np.mean(apply_noise(y, symmetric_matrix(10, 0.5), 0) != y))
    return abs(rate - 0.5) <= 0.015, f"flip_rate={rate:.4f} target=0.5"


def _noise_pair():
    n = 10_000
    y = np.arange(n) % 10
    noisy = apply_noise(y, pair_matrix(10, 0.45), 0)
    flipped = noisy != y
    only_successor = bool(np.all(noisy[flipped] == (y[flipped] + 1) % 10))
    rate = float(np.mean(flipped))
    return only_successor and abs(rate - 0.45) <= 0.015, \
        f"flip_rate={rate:.4f} target=0.45 successor_only={only_successor}"


def _selection():
    rng = make_rng(0, "probe")
    mismatches = 0
    for _ in range(50):
        losses = rng.exponential(size=1000)
        count = int(rng.integers(0, 1001))
        v, _ = cur.select_confident(losses, count)
        oracle = set(sorted(range(1000), key=lambda i: (losses[i], i))[:count])
        mismatches += set(np.flatnonzero(v).tolist()) != oracle or int(v.sum()) != count
    return mismatches == 0, f"instances=50 mismatches={mismatches}"


def _schedules():
    bad = 0
    checked = 0
    for n, m, K, T1, T, gd in [(1000, 300, 10, 20, 200, 10.0), (2000, 400, 10, 15, 200, 300.0),
                               (500, 250, 20, 5, 100, 1.0), (1000, 100, 5, 40, 300, 5.0)]:
        cfg = PaceConfig(n=n, T1=T1, T=T, K=K, m=m, gamma_d=gd)
        step = (T - T1) * n // (K * n - m * K + n)
        g_max = gd * (10 - math.ceil(10 * m / n))
        deltas = []
        for t in range(1, T + 1):
            want_d = n if t <= T1 else min(m + ((t - T1) // step) * (n // K), n)
            want_g = 0.0 if t <= T1 else g_max * math.exp(-5 * (1 - (t - T1) / (T - T1)) ** 2)
            d, g = cur.delta(t, cfg), cur.gamma(t, cfg)
            bad += d != want_d or abs(g - want_g) > 1e-12 * max(1.0, g_max)
            deltas.append(d)
            checked += 1
        bad += any(a > b for a, b in zip(deltas[T1:], deltas[T1 + 1:]))
        bad += deltas[-1] != n or cur.gamma(T, cfg) != g_max
    return bad == 0, f"points={checked} mismatches={bad}"


def _uniformization():
    from .experiment import uniformization_run
    _, res = uniformization_run()
    final = res[-1]
    return abs(final - math.log(10)) <= 0.05, f"final_loss={final:.4f} target={math.log(10):.4f}"


def registered_checks(fns=None):
    fns = fns or default_losses()
    checks = [("ratio_step_enumeration", _ratio_step)]
    for name in ("ce", "resistance", "kd", "label_smooth", "bootstrap"):
        checks.append((f"grad_{name}", lambda name=name: _loss_grad_check(name, fns)))
    checks += [("grad_sprl_combined", lambda: _combined_grad_check(fns)),
               ("grad_network_backprop", lambda: _network_grad_check(fns)),
               ("noise_symmetric_rate", _noise_symmetric),
               ("noise_pair_successor", _noise_pair),
               ("selection_oracle", _selection),
               ("schedule_oracle", _schedules),
               ("uniformization_asymptote", _uniformization)]
    return checks


def verify_suite(loss_overrides=None, skip=(), out=print) -> list[CheckResult]:
    """Run every registered property and print one report line each.

    ``loss_overrides`` replaces entries of :func:`default_losses` (used to
    confirm that a broken gradient is caught). Names in ``skip`` are reported
    as ``SKIP`` without running.
    """
    fns = default_losses()
    fns.update(loss_overrides or {})
    results = []
    for name, check in registered_checks(fns):
        if name in skip:
            out(f"SKIP {name}")
            results.append(CheckResult(name, True, "skipped"))
            continue
        try:
            passed, detail = check()
        except Exception as exc:  # a crashing check is a failed property
            passed, detail = False, f"error={type(exc).__name__}: {exc}"
        result = CheckResult(name, bool(passed), detail)
        out(result.line())
        results.append(result)
    return results
