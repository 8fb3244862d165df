"""Acceptance gate: ten criteria, one pass/fail line each.

Every criterion's computation is factored into a pure, seed-pinned pipeline
(_criterion_N) that returns its measurements plus a sha256 digest of every
number it produced. The criterion tests run each pipeline once (cached);
criterion 10 re-executes pipelines 1-9 from scratch and compares digests,
which is the bit-identical-rerun check. The PASS/FAIL lines are printed per
test and echoed in the terminal summary.

Statistical gates (1, 6, 8, 9) are evaluated at fixed seeds; the seeds are
part of the pinned configuration, so the suite is deterministic.
"""

import hashlib
import time

import numpy as np
import pytest

from conftest import random_diag_gaussian, random_full_gaussian
from gjsd import fit2d
from gjsd.divergence import (
    DivergenceSpec,
    Family,
    gjs_diag,
    gjs_dual_diag,
    gjs_dual_full,
    gjs_full,
    gjs_primed_quadratic,
    kl_full,
)
from gjsd.gaussian import FullGaussian, SkewConvention
from gjsd.oracle import (
    DensityHandle,
    default_bounds_1d,
    mc_gjs,
    mc_kl,
    quad_divergence_1d,
)
from gjsd.vae import (
    TrainConfig,
    VaeArch,
    VaeModel,
    estimate_log_evidence,
    grad_check,
    train,
)

_LINES = []
_CACHE = {}
_CRITERIA = {}
_DESK = None  # (train_x, test_x), set by the tests that need it

ORIGINAL = SkewConvention.ORIGINAL
PRIMED = SkewConvention.PRIMED


def _register(n):
    def deco(fn):
        _CRITERIA[n] = fn
        return fn

    return deco


def _result(n):
    if n not in _CACHE:
        _CACHE[n] = _CRITERIA[n]()
    return _CACHE[n]


def _report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    _LINES.append(line)
    print(line)
    return ok


class _Digest:
    def __init__(self):
        self._h = hashlib.sha256()

    def add(self, value):
        if isinstance(value, np.ndarray):
            self._h.update(np.ascontiguousarray(value, dtype=np.float64).tobytes())
        else:
            self._h.update(repr(value).encode())
        self._h.update(b";")

    def hex(self):
        return self._h.hexdigest()


# --- criterion 1: closed form vs Monte Carlo and quadrature oracles --------

_C1_MASTER = 11


@_register(1)
def _criterion_1():
    t0 = time.perf_counter()
    dg = _Digest()
    rng = np.random.default_rng(_C1_MASTER)
    pairs = []
    for i in range(50):
        dim = 1 + i % 5
        pairs.append(
            (random_full_gaussian(rng, dim), random_full_gaussian(rng, dim))
        )
    configs = [("kl", None, None)]
    for kind in ("gjs", "dual"):
        for conv in (ORIGINAL, PRIMED):
            for alpha in (0.1, 0.5, 0.9):
                configs.append((kind, conv, alpha))

    max_z = 0.0
    max_exact = 0.0
    n_exact = 0
    max_qdev = 0.0
    run_idx = 0
    for kind, conv, alpha in configs:
        for p, q in pairs:
            hp = DensityHandle.from_gaussian(p)
            hq = DensityHandle.from_gaussian(q)
            seed = _C1_MASTER * 1_000_000 + run_idx
            run_idx += 1
            if kind == "kl":
                closed = kl_full(p, q)
                est = mc_kl(hp, hq, 1_000_000, seed)
                spec = DivergenceSpec(family=Family.KL_FORWARD)
            elif kind == "gjs":
                closed = gjs_full(p, q, alpha, conv)
                est = mc_gjs(hp, hq, alpha, conv, False, 1_000_000, seed)
                spec = DivergenceSpec(
                    family=Family.GJS, alpha=alpha, convention=conv
                )
            else:
                closed = gjs_dual_full(p, q, alpha, conv)
                est = mc_gjs(hp, hq, alpha, conv, True, 1_000_000, seed)
                spec = DivergenceSpec(
                    family=Family.GJS_DUAL, alpha=alpha, convention=conv
                )
            dev = abs(closed - est.value)
            floor = 1e-13 * max(1.0, abs(closed))
            if est.std_error > floor:
                max_z = max(max_z, dev / est.std_error)
            else:
                # Degenerate-variance cell: the dual integrand is a.s.
                # constant when the outer weight matches the intermediate
                # skew, so the estimator is exact and the gate is
                # roundoff-level agreement, stricter than any 3 SE check.
                n_exact += 1
                max_exact = max(max_exact, dev / max(1.0, abs(closed)))
            dg.add(closed)
            dg.add(est.value)
            dg.add(est.std_error)
            if p.dim == 1:
                lo, hi = default_bounds_1d(hp, hq)
                quad = quad_divergence_1d(hp, hq, spec, lo, hi, tol=1e-9)
                max_qdev = max(max_qdev, abs(closed - quad))
                dg.add(quad)
    elapsed = time.perf_counter() - t0
    return {
        "digest": dg.hex(),
        "max_z": max_z,
        "max_exact": max_exact,
        "n_exact": n_exact,
        "max_qdev": max_qdev,
        "n_runs": run_idx,
        "elapsed": elapsed,
    }


def test_criterion_1_oracle_agreement():
    r = _result(1)
    ok = (
        r["max_z"] < 3.0
        and r["max_exact"] <= 1e-13
        and r["max_qdev"] <= 1e-6
        and r["elapsed"] <= 300.0
    )
    _report(
        1, ok,
        f"{r['n_runs']} MC runs at 1e6 draws: max |z| {r['max_z']:.2f} "
        f"(limit 3 SE) over {r['n_runs'] - r['n_exact']} stochastic cells, "
        f"max rel dev {r['max_exact']:.1e} (tol 1e-13) over {r['n_exact']} "
        f"zero-variance dual cells; 1-D quadrature max abs dev "
        f"{r['max_qdev']:.2e} (tol 1e-6); {r['elapsed']:.0f}s (budget 300s)",
    )
    assert r["max_z"] < 3.0
    assert r["max_exact"] <= 1e-13
    assert r["max_qdev"] <= 1e-6
    assert r["elapsed"] <= 300.0


# --- criterion 2: quadratic identity against the primed closed form --------


@_register(2)
def _criterion_2():
    t0 = time.perf_counter()
    dg = _Digest()
    rng = np.random.default_rng(202)
    max_rel = 0.0
    for i in range(1000):
        dim = 1 + i % 5
        p = random_full_gaussian(rng, dim)
        q = random_full_gaussian(rng, dim)
        alpha = rng.uniform(0.0, 1.0)
        quad_form = gjs_primed_quadratic(p, q, alpha)
        full = gjs_full(p, q, alpha, PRIMED)
        rel = abs(quad_form - full) / max(abs(full), 1e-300)
        max_rel = max(max_rel, rel)
        dg.add(quad_form)
        dg.add(full)
    return {
        "digest": dg.hex(),
        "max_rel": max_rel,
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_2_quadratic_identity():
    r = _result(2)
    ok = r["max_rel"] <= 1e-9
    _report(
        2, ok,
        f"max relative deviation {r['max_rel']:.3e} (tol 1e-9) over 1000 "
        "pairs; the quadratic form omits the intermediate's log-normalizer, "
        "so the deviation is structural, not numerical",
    )
    assert r["max_rel"] <= 1e-9


# --- criterion 3: endpoint limits ------------------------------------------


@_register(3)
def _criterion_3():
    t0 = time.perf_counter()
    dg = _Digest()
    rng = np.random.default_rng(303)
    eps = 1e-9
    max_rel = 0.0
    max_endpoint = 0.0
    for i in range(100):
        dim = 1 + i % 5
        p = random_full_gaussian(rng, dim)
        q = random_full_gaussian(rng, dim)
        kl_pq = kl_full(p, q)
        kl_qp = kl_full(q, p)
        checks = (
            (gjs_full(p, q, eps, PRIMED), kl_pq),
            (gjs_full(p, q, 1.0 - eps, PRIMED), kl_qp),
            (gjs_dual_full(p, q, eps, PRIMED), kl_qp),
            (gjs_dual_full(p, q, 1.0 - eps, PRIMED), kl_pq),
        )
        for value, limit in checks:
            rel = abs(value - limit) / abs(limit)
            max_rel = max(max_rel, rel)
            dg.add(value)
        for alpha in (0.0, 1.0):
            for fn in (gjs_full, gjs_dual_full):
                v = fn(p, q, alpha, ORIGINAL)
                max_endpoint = max(max_endpoint, abs(v))
                dg.add(v)
    return {
        "digest": dg.hex(),
        "max_rel": max_rel,
        "max_endpoint": max_endpoint,
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_3_endpoint_limits():
    r = _result(3)
    ok = r["max_rel"] <= 1e-6 and r["max_endpoint"] <= 1e-10
    _report(
        3, ok,
        f"primed gjs/dual at alpha 1e-9 and 1-1e-9 vs the four KL limits: "
        f"max rel dev {r['max_rel']:.2e} (tol 1e-6); original at alpha 0/1: "
        f"max |value| {r['max_endpoint']:.1e} (tol 1e-10); 100 pairs",
    )
    assert r["max_rel"] <= 1e-6
    assert r["max_endpoint"] <= 1e-10


# --- criterion 4: diagonal reduction vs full-matrix forms ------------------


@_register(4)
def _criterion_4():
    t0 = time.perf_counter()
    dg = _Digest()
    rng = np.random.default_rng(404)
    max_dev = 0.0
    for i in range(1000):
        dim = 1 + i % 8
        g = random_diag_gaussian(rng, dim)
        alpha = rng.uniform(0.0, 1.0)
        conv = ORIGINAL if i % 2 == 0 else PRIMED
        g_full = g.to_full()
        std = FullGaussian(np.zeros(dim), np.eye(dim))
        for diag_fn, full_fn in (
            (gjs_diag, gjs_full),
            (gjs_dual_diag, gjs_dual_full),
        ):
            d_val = float(diag_fn(g, alpha, conv))
            f_val = full_fn(g_full, std, alpha, conv)
            max_dev = max(max_dev, abs(d_val - f_val))
            dg.add(d_val)
            dg.add(f_val)
    return {
        "digest": dg.hex(),
        "max_dev": max_dev,
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_4_diagonal_reduction():
    r = _result(4)
    ok = r["max_dev"] <= 1e-10
    _report(
        4, ok,
        f"gjs_diag/gjs_dual_diag vs embedded full forms: max abs dev "
        f"{r['max_dev']:.2e} (tol 1e-10) over 1000 (g, alpha, convention) "
        "triples, dims 1-8",
    )
    assert r["max_dev"] <= 1e-10


# --- criterion 5: midpoint symmetry ----------------------------------------


@_register(5)
def _criterion_5():
    t0 = time.perf_counter()
    dg = _Digest()
    rng = np.random.default_rng(505)
    max_dev = 0.0
    for i in range(1000):
        dim = 1 + i % 5
        p = random_full_gaussian(rng, dim)
        q = random_full_gaussian(rng, dim)
        for conv in (ORIGINAL, PRIMED):
            for fn in (gjs_full, gjs_dual_full):
                fwd = fn(p, q, 0.5, conv)
                rev = fn(q, p, 0.5, conv)
                max_dev = max(max_dev, abs(fwd - rev))
                dg.add(fwd)
                dg.add(rev)
    return {
        "digest": dg.hex(),
        "max_dev": max_dev,
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_5_midpoint_symmetry():
    r = _result(5)
    ok = r["max_dev"] <= 1e-10
    _report(
        5, ok,
        f"gjs and gjs_dual at alpha 0.5, both conventions: max |d(p,q) - "
        f"d(q,p)| {r['max_dev']:.2e} (tol 1e-10) over 1000 pairs",
    )
    assert r["max_dev"] <= 1e-10


# --- criterion 6: fitted level-set ordering on the benchmark mixture -------


@_register(6)
def _criterion_6():
    t0 = time.perf_counter()
    dg = _Digest()
    mix = fit2d.benchmark_mixture()
    specs = {
        "klf": DivergenceSpec(family=Family.KL_FORWARD),
        "gjs": DivergenceSpec(
            family=Family.GJS, alpha=0.5, convention=PRIMED
        ),
        "klr": DivergenceSpec(family=Family.KL_REVERSE),
    }
    per_seed = {}
    for seed in (1, 2, 3):
        data = fit2d.mixture_sample(mix, 512, seed=seed)
        row = {}
        for name, spec in specs.items():
            trace = fit2d.fit(data, spec, {"seed": seed})
            summary = fit2d.fitted_summary(trace)
            row[name] = summary
            dg.add(summary["mu"])
            dg.add(summary["sigma"])
            dg.add(summary["final_loss"])
        per_seed[seed] = row
    ratios = []
    distances = []
    for seed, row in per_seed.items():
        det_f = row["klf"]["det_sigma"]
        det_g = row["gjs"]["det_sigma"]
        det_r = row["klr"]["det_sigma"]
        ratios.append((det_f / det_g, det_g / det_r))
        mu = row["klr"]["mu"]
        distances.append(float(np.hypot(mu[0] - 3.0, mu[1])))
    return {
        "digest": dg.hex(),
        "ratios": ratios,
        "distances": distances,
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_6_det_ordering():
    r = _result(6)
    order_ok = all(a >= 1.1 and b >= 1.1 for a, b in r["ratios"])
    mode_ok = all(d <= 0.5 for d in r["distances"])
    ok = order_ok and mode_ok and r["elapsed"] <= 600.0
    worst = min(min(pair) for pair in r["ratios"])
    _report(
        6, ok,
        f"det ordering KLForward > GJS(0.5, primed) > KLReverse on 3/3 "
        f"seeds, worst gap ratio {worst:.2f} (needs >= 1.10); KLReverse "
        f"mean distance to (3,0) max {max(r['distances']):.3f} (tol 0.5); "
        f"{r['elapsed']:.0f}s (budget 600s)",
    )
    assert order_ok
    assert mode_ok
    assert r["elapsed"] <= 600.0


# --- criterion 7: analytic gradients vs finite differences -----------------


@_register(7)
def _criterion_7():
    t0 = time.perf_counter()
    dg = _Digest()
    arch = VaeArch(input_dim=16, hidden_dims=(32,), latent_dim=8)
    model = VaeModel.init(arch, seed=7)
    x = np.random.default_rng(77).uniform(0.0, 1.0, size=(16, 16))
    worst = 0.0
    families = (Family.KL_FORWARD, Family.KL_REVERSE, Family.GJS, Family.GJS_DUAL)
    for family in families:
        for conv in (ORIGINAL, PRIMED):
            for alpha in (0.1, 0.5, 0.9):
                spec = DivergenceSpec(
                    family=family, alpha=alpha, convention=conv
                )
                err = grad_check(model, x, spec, seed=7)
                worst = max(worst, err)
                dg.add(err)
    return {
        "digest": dg.hex(),
        "worst": worst,
        "n_params": model.n_params(),
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_7_gradient_correctness():
    r = _result(7)
    ok = r["worst"] <= 1e-4 and r["n_params"] <= 5000 and r["elapsed"] <= 300.0
    _report(
        7, ok,
        f"grad_check over 4 families x 2 conventions x 3 alphas on a "
        f"{r['n_params']}-parameter model: worst rel err {r['worst']:.2e} "
        f"(tol 1e-4); {r['elapsed']:.1f}s (budget 300s)",
    )
    assert r["worst"] <= 1e-4
    assert r["n_params"] <= 5000
    assert r["elapsed"] <= 300.0


# --- criteria 8 and 9: desk-scale training trends ---------------------------


def _desk_arch():
    return VaeArch(input_dim=64, hidden_dims=(256, 256), latent_dim=10)


def _desk_run(cache, family, conv, alpha, seed):
    key = (family, conv, alpha, seed)
    if key not in cache:
        spec = DivergenceSpec(family=family, alpha=alpha, convention=conv)
        cfg = TrainConfig(
            reg=spec, batch_size=64, epochs=20, lr=1e-3, seed=seed,
            dataset_path="desk",
        )
        model = VaeModel.init(_desk_arch(), seed=seed)
        _, record = train(model, (_DESK[0], _DESK[1]), cfg)
        cache[key] = record
    return cache[key]


@_register(8)
def _criterion_8():
    t0 = time.perf_counter()
    dg = _Digest()
    cache = {}
    seeds = (1, 2, 3, 4, 5)

    wins_a = 0
    for seed in seeds:
        dual = _desk_run(cache, Family.GJS_DUAL, PRIMED, 0.3, seed)
        klr = _desk_run(cache, Family.KL_REVERSE, None, 0.5, seed)
        wins_a += dual.final()["test_recon"] < klr.final()["test_recon"]
    wins_b = 0
    for seed in seeds:
        gjs = _desk_run(cache, Family.GJS, PRIMED, 0.1, seed)
        klf = _desk_run(cache, Family.KL_FORWARD, None, 0.5, seed)
        wins_b += gjs.final()["test_recon"] < klf.final()["test_recon"]
    alphas = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    grid = [_desk_run(cache, Family.GJS_DUAL, PRIMED, a, 1) for a in alphas]
    train_finals = np.array([r.final()["train_recon"] for r in grid])
    test_finals = np.array([r.final()["test_recon"] for r in grid])
    pearson = float(np.corrcoef(train_finals, test_finals)[0, 1])

    for key in sorted(cache, key=repr):
        record = cache[key]
        dg.add(np.array(record.train_recon))
        dg.add(np.array(record.train_div))
        dg.add(np.array(record.test_recon))
        dg.add(np.array(record.test_div))
    return {
        "digest": dg.hex(),
        "wins_a": wins_a,
        "wins_b": wins_b,
        "pearson": pearson,
        "n_runs": len(cache),
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_8_desk_trends(desk_dataset):
    global _DESK
    _DESK = (desk_dataset[1], desk_dataset[2])
    r = _result(8)
    ok = (
        r["wins_a"] >= 4 and r["wins_b"] >= 4 and r["pearson"] >= 0.9
        and r["elapsed"] <= 1800.0
    )
    _report(
        8, ok,
        f"(a) GJSDual primed 0.3 beats KLReverse {r['wins_a']}/5 seeds "
        f"(needs >= 4); (b) GJS primed 0.1 beats KLForward {r['wins_b']}/5 "
        f"(needs >= 4); (c) train/test Pearson {r['pearson']:.5f} (needs "
        f">= 0.9) over 9 alphas; {r['n_runs']} runs of 20 epochs in "
        f"{r['elapsed']:.0f}s (budget 1800s)",
    )
    assert r["wins_a"] >= 4
    assert r["wins_b"] >= 4
    assert r["pearson"] >= 0.9
    assert r["elapsed"] <= 1800.0


@_register(9)
def _criterion_9():
    t0 = time.perf_counter()
    dg = _Digest()
    train_x, test_x = _DESK
    arch = _desk_arch()
    spec = DivergenceSpec(
        family=Family.GJS_DUAL, alpha=0.3, convention=PRIMED
    )
    cfg = TrainConfig(
        reg=spec, batch_size=64, epochs=20, lr=1e-3, seed=1,
        dataset_path="desk",
    )
    untrained = VaeModel.init(arch, seed=1)
    trained, _ = train(untrained, (train_x, test_x), cfg)
    batch = train_x[:256]
    ev_untrained = estimate_log_evidence(untrained, batch, 64, seed=0)
    ev_trained = estimate_log_evidence(trained, batch, 64, seed=0)
    k2 = [estimate_log_evidence(trained, batch, 2, seed=s) for s in range(20)]
    k16 = [estimate_log_evidence(trained, batch, 16, seed=s) for s in range(20)]
    dg.add(ev_untrained)
    dg.add(ev_trained)
    dg.add(np.array(k2))
    dg.add(np.array(k16))
    return {
        "digest": dg.hex(),
        "ev_untrained": ev_untrained,
        "ev_trained": ev_trained,
        "mean_k2": float(np.mean(k2)),
        "mean_k16": float(np.mean(k16)),
        "elapsed": time.perf_counter() - t0,
    }


def test_criterion_9_evidence_sanity(desk_dataset):
    global _DESK
    _DESK = (desk_dataset[1], desk_dataset[2])
    r = _result(9)
    ok = (
        r["ev_trained"] > r["ev_untrained"]
        and r["mean_k16"] >= r["mean_k2"]
        and r["elapsed"] <= 300.0
    )
    _report(
        9, ok,
        f"log evidence untrained {r['ev_untrained']:.3f} < trained "
        f"{r['ev_trained']:.3f}; mean over 20 seeds k=16 {r['mean_k16']:.4f} "
        f">= k=2 {r['mean_k2']:.4f}; {r['elapsed']:.0f}s (budget 300s)",
    )
    assert r["ev_trained"] > r["ev_untrained"]
    assert r["mean_k16"] >= r["mean_k2"]
    assert r["elapsed"] <= 300.0


# --- criterion 10: bit-identical reruns -------------------------------------


def test_criterion_10_determinism(desk_dataset):
    global _DESK
    _DESK = (desk_dataset[1], desk_dataset[2])
    mismatched = []
    for n in range(1, 10):
        first = _result(n)["digest"]
        fresh = _CRITERIA[n]()["digest"]
        if first != fresh:
            mismatched.append(n)
    ok = not mismatched
    _report(
        10, ok,
        "criteria 1-9 re-executed end to end with identical seeds: "
        + (
            "all digests bit-identical"
            if ok
            else f"digest mismatch in criteria {mismatched}"
        ),
    )
    assert not mismatched
