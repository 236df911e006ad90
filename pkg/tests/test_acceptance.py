"""Acceptance suite: one recorded pass/fail line per criterion.

Each test records its measured values through the ``accept`` fixture
before asserting, so the terminal summary lists every criterion even when
some fail.
"""
import math
import time

import numpy as np
import pytest

from risarray import preset
from risarray import ris as R
from risarray.estimation import (build_training_basis, lmmse_estimate, make_pilot_book,
                                 make_training_configs, simulate_training)
from risarray.geometry import crandn, draw_channels, large_scale_gains, place_ues
from risarray.harness import (Campaign, Scenario, drop_streams, load_manifest, run_campaign, run_drop,
                              run_variant, scale_active)
from risarray.metrics import fp_hardening_closed, fp_hardening_mc
from risarray.oracles import central_difference, lmmse_textbook, maxmin_grid, passive_exhaustive
from risarray.power import SinrCoefficients, maxmin_bisection
from risarray.spectral import hardening_closed_form, hardening_terms_mc, make_precoders


def rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))))


# ------------------------------------------------------------------ 1. legacy hardening metric

def test_c1_legacy_hardening_metric(accept):
    t0 = time.perf_counter()
    f = fp_hardening_closed(np.eye(16), np.ones(16))
    rep = fp_hardening_mc(np.eye(16), np.ones(16), 100_000, np.random.default_rng(1))
    off = np.real(rep.f_cross[~np.eye(2, dtype=bool)])
    err = max(rel(rep.f_self, 1 / 16), rel(off, 1 / 16))
    dt = time.perf_counter() - t0
    ok = f == 1 / 16 and err < 0.05 and dt < 10
    accept("1 legacy metric", ok, f"closed={f!r} (1/16={1 / 16!r}) mc_rel_err={err:.4f} time={dt:.2f}s")
    assert ok


# ------------------------------------------------------------------ 2. lemma lower bound

def test_c2_lemma_lower_bound(accept):
    rng = np.random.default_rng(2)
    violations = 0
    worst = math.inf
    for _ in range(1000):
        n_a = int(rng.integers(1, 17))
        n_r = n_a + int(rng.integers(0, 49))
        H = crandn(rng, (n_a, n_r)) * rng.uniform(0.01, 10, (n_a, n_r))
        p = rng.uniform(0.1, 2, n_r) * np.exp(1j * rng.uniform(0, 2 * np.pi, n_r))
        margin = fp_hardening_closed(H, p) - 1 / n_a
        worst = min(worst, margin)
        violations += margin < -1e-12
    accept("2 lemma bound", violations == 0, f"violations={violations}/1000 min_margin={worst:.3e}")
    assert violations == 0


# ------------------------------------------------------------------ 3. closed form vs Monte Carlo

def desk_random_drop(mode):
    cfg = preset("desk", ris_policy="random", ris_mode=mode,
                 power_split=0.2 if mode == "active" else 0.0)
    scn = Scenario.prepare(cfg)
    ue, fade, train, fixed, *_ = drop_streams(cfg.rng_seed, 0)
    beta = large_scale_gains(place_ues(cfg, ue), cfg, ue)
    configs = make_training_configs(cfg.n_ris, cfg.n_active, train, active=bool(scn.delta),
                                    betas=beta, powers=scn.pilots.powers, sigma_r2=scn.sigma_r2,
                                    gain_db=cfg.training_gain_db)
    basis = build_training_basis(scn.H, configs, cfg.svd_energy_fraction)
    if scn.delta:
        p = scale_active(scn, R.random_active(cfg.n_ris, fixed).p)
    else:
        p = R.random_passive(cfg.n_ris, fixed).p
    return cfg, scn, beta, basis, p


@pytest.mark.parametrize("mode", ["passive", "active"])
def test_c3_closed_form_matches_monte_carlo(mode, accept):
    t0 = time.perf_counter()
    cfg, scn, beta, basis, p = desk_random_drop(mode)
    assert scn.pilots.pilots.shape[0] >= cfg.ue_count  # orthogonal pilots
    last = {}

    def sample(rng):
        h = draw_channels(scn.H, beta, rng).h
        y = simulate_training(h, scn.H, basis, scn.pilots, scn.sigma2, scn.sigma_r2, scn.delta, rng)
        est = lmmse_estimate(y, basis, scn.pilots, beta, scn.sigma2, scn.sigma_r2, scn.delta)
        last["est"] = est
        return h, scn.H, p, make_precoders(scn.H, p, est.estimates, normalized=False), scn.sigma_r2

    mc = hardening_terms_mc(sample, 10_000, np.random.default_rng(3))
    cf = hardening_closed_form(scn.H, p, last["est"], beta, scn.sigma_r2)
    off = ~np.eye(cfg.ue_count, dtype=bool)
    errs = {"DS": rel(np.real(mc.ds), np.real(cf.ds)), "BU": rel(mc.bu, cf.bu),
            "UI": rel(mc.ui[off], cf.ui[off])}
    if scn.delta:
        errs["dyn"] = rel(mc.dyn, cf.dyn)
    eta = maxmin_bisection(cf.coefficients(scn.sigma2, scn.delta, cfg.array_budget)).eta
    errs["gamma_LB"] = rel(mc.sinr(eta, scn.sigma2, scn.delta), cf.sinr(eta, scn.sigma2, scn.delta))
    dt = time.perf_counter() - t0
    ok = max(errs.values()) < 0.03 and dt < 300
    detail = " ".join(f"{k}={v:.4f}" for k, v in errs.items())
    accept(f"3 closed form vs MC ({mode})", ok, f"max rel err: {detail} time={dt:.1f}s")
    assert ok


# ------------------------------------------------------------------ 4. LMMSE

def lmmse_instance(seed, delta, K=3, tau=2, n_a=2, n_r=5):
    rng = np.random.default_rng(seed)
    H = crandn(rng, (n_a, n_r))
    basis = build_training_basis(H, make_training_configs(n_r, n_a, rng), 0.98)
    book = make_pilot_book(tau, K, rng.uniform(0.2, 0.6, K))
    betas = rng.uniform(0.5, 2.0, K)
    h = np.sqrt(betas)[:, None] * crandn(rng, (K, n_r))
    y = simulate_training(h, H, basis, book, 0.3, 0.2, delta, rng)
    return H, basis, book, betas, y


def test_c4_lmmse(accept):
    worst_oracle = 0.0
    for seed in range(10):
        for delta in (0, 1):
            H, basis, book, betas, y = lmmse_instance(seed, delta)
            est = lmmse_estimate(y, basis, book, betas, 0.3, 0.2, delta)
            phi = book.pilots[book.assignment]
            for k in range(len(betas)):
                ref, _ = lmmse_textbook(y[k], basis.stacked, basis.U, basis.configs, phi, book.powers,
                                        betas, 0.3, 0.2, delta, k)
                worst_oracle = max(worst_oracle, np.abs(est.estimates[k] - ref).max() / np.abs(ref).max())

    rng = np.random.default_rng(4)
    n_a, n_r, K = 2, 6, 2
    H = crandn(rng, (n_a, n_r))
    basis = build_training_basis(H, make_training_configs(n_r, n_a, rng), 0.98)
    book = make_pilot_book(2, K, 0.4)
    betas = np.array([1.0, 0.5])
    acc = np.zeros((K, n_r, n_r), dtype=complex)
    n = 10_000
    for _ in range(n):
        h = np.sqrt(betas)[:, None] * crandn(rng, (K, n_r))
        y = simulate_training(h, H, basis, book, 0.5, 0.1, 1, rng)
        est = lmmse_estimate(y, basis, book, betas, 0.5, 0.1, 1)
        acc += est.estimates[:, :, None] * (h - est.estimates).conj()[:, None, :]
    orth = max(np.abs(acc[k] / n).max() / betas[k] for k in range(K))

    worst_copilot = 0.0
    for seed in range(20):
        H, basis, book, betas, y = lmmse_instance(seed, seed % 2, K=5, tau=2)
        est = lmmse_estimate(y, basis, book, betas, 0.3, 0.2, seed % 2)
        for k in range(5):
            for j in est.copilot_sets[k]:
                d = np.abs(est.estimates[k] - est.c[k, j] * est.estimates[j]).max()
                worst_copilot = max(worst_copilot, d / np.abs(est.estimates[k]).max())
    ok = worst_oracle < 1e-10 and orth < 0.05 and worst_copilot < 1e-12
    accept("4 LMMSE", ok, f"oracle_rel={worst_oracle:.2e} orthogonality/beta={orth:.4f} "
                          f"copilot_rel={worst_copilot:.2e}")
    assert ok


# ------------------------------------------------------------------ 5. optimizers

def ris_instance(rng, n_a=4, n_r=10, K=3):
    H = crandn(rng, (n_a, n_r))
    h = rng.uniform(0.1, 3.0, K)[:, None] * crandn(rng, (K, n_r))
    return R.CostContext(H, h)


def test_c5_optimizers(accept):
    rng = np.random.default_rng(5)
    violations = {"passive": 0, "active": 0}
    for _ in range(100):
        ctx = ris_instance(rng)
        hp = np.array(R.optimize_passive(ctx, R.random_passive(10, rng), max_sweeps=30).history)
        ha = np.array(R.optimize_active_direction(ctx, R.random_active(10, rng), max_iters=300).history)
        violations["passive"] += int(np.sum(np.diff(hp) > 0))
        violations["active"] += int(np.sum(np.diff(ha) > 0))

    fd_err = 0.0
    for _ in range(20):
        ctx = ris_instance(rng)
        p = crandn(rng, 10)
        p /= np.linalg.norm(p)
        d = crandn(rng, 10)
        fd = central_difference(lambda x: R.cross_corr_cost(x, ctx), p, d)
        fd_err = max(fd_err, abs(np.real(np.vdot(R.active_gradient(p, ctx), d)) - fd) / abs(fd))

    gaps, missed = [], []
    for _ in range(20):
        ctx = ris_instance(rng, n_a=3, n_r=5, K=3)
        best, _ = passive_exhaustive(ctx.H, ctx.h, 2)
        init = R.random_passive(5, rng, 2)
        start = R.cross_corr_cost(init.p, ctx)
        got = R.optimize_passive(ctx, init).history[-1]
        assert got >= best * (1 - 1e-9)
        gaps.append(got / best - 1)
        missed.append((got - best) / (start - best))
    gaps, missed = np.array(gaps), np.array(missed)
    within = bool(gaps.max() <= 0.05)
    # the exhaustive comparison is satisfied either by a 5% gap or by reporting the gap
    gap_note = ("within 5%" if within else "gap reported, not within 5%")
    ok = sum(violations.values()) == 0 and fd_err < 1e-5
    accept("5 optimizers", ok,
           f"monotone violations={violations} fd_rel_err={fd_err:.2e} "
           f"exhaustive 2-bit N_R=5 ({gap_note}): rel gap max={gaps.max():.3f} "
           f"median={np.median(gaps):.3f} within5%={int(np.sum(gaps <= 0.05))}/20; "
           f"missed share of reduction max={missed.max():.3f} median={np.median(missed):.3f}")
    assert ok


# ------------------------------------------------------------------ 6. power control

def test_c6_power_control(accept):
    rng = np.random.default_rng(6)
    nu = 1e-6
    worst_gap = worst_balance = worst_budget = 0.0
    for _ in range(100):
        co = SinrCoefficients(a=rng.uniform(0.5, 2.0, 2), b=rng.uniform(0.0, 0.3, (2, 2)),
                              c=rng.uniform(0, 0.1, 2), noise=np.full(2, 0.1),
                              w_norms2=rng.uniform(0.5, 1.5, 2), budget=1.0)
        t_grid, _ = maxmin_grid(co.a, co.b, co.c, co.noise, co.w_norms2, co.budget)
        out = maxmin_bisection(co, tol=nu)
        s = co.sinr(out.eta)
        worst_gap = max(worst_gap, abs(out.t - t_grid) / t_grid)
        worst_balance = max(worst_balance, (s.max() - s.min()) / (2 * nu))
        worst_budget = max(worst_budget, abs(out.eta @ co.w_norms2 - co.budget) / co.budget)
    ok = worst_gap < 0.01 and worst_balance <= 1 and worst_budget <= 1e-9
    accept("6 power control", ok, f"grid_rel_gap={worst_gap:.2e} spread/(2nu)={worst_balance:.3f} "
                                  f"budget_rel_err={worst_budget:.2e}")
    assert ok


# ------------------------------------------------------------------ 7. active-RIS power accounting

def test_c7_active_power_accounting(accept):
    rng = np.random.default_rng(7)
    worst = 0.0
    for alpha in (math.pi, math.pi / 5):
        scn = Scenario.prepare(preset("desk", sector_width=alpha, ris_mode="active"))
        cfg = scn.config
        for eps in np.linspace(0.05, 0.95, 19):
            p = R.random_active(cfg.n_ris, rng).p
            omega = R.ris_power_scale(p, scn.H, eps, cfg.power_budget, scn.sigma_r2)
            got = R.ris_reflected_power(np.sqrt(omega) * p, scn.H, (1 - eps) * cfg.power_budget,
                                        scn.sigma_r2)
            worst = max(worst, abs(got - eps * cfg.power_budget) / (eps * cfg.power_budget))
    se_err = 0.0
    for seed in range(3):
        for drop in range(2):
            a = run_drop(Scenario.prepare(preset("desk", ris_mode="active", power_split=0.0,
                                                 n_fading=3)), seed, drop)
            p = run_drop(Scenario.prepare(preset("desk", n_fading=3)), seed, drop)
            se_err = max(se_err, rel(a.pcsi_se, p.pcsi_se), rel(a.lb_se, p.lb_se))
    ok = worst <= 1e-12 and se_err <= 1e-9
    accept("7 active power", ok, f"reflected_power_rel_err={worst:.2e} eps0_vs_passive_rel={se_err:.2e}")
    assert ok


# ------------------------------------------------------------------ 8. qualitative reproductions

N_DROPS = 200
EPS_DEFAULT = 0.2
EPS_CURVE = (0.1, 0.3, 0.5, 0.7)
_CACHE: dict = {}
_ELAPSED = [0.0]


def desk8(**kw):
    return preset("desk", sector_width=math.pi / 5, **kw)


VARIANTS = {
    "legacy": lambda: desk8(architecture="legacy"),
    "passive": lambda: desk8(),
    "active": lambda: desk8(ris_mode="active", power_split=EPS_DEFAULT),
    "passive_random": lambda: desk8(ris_policy="random"),
    "active_random": lambda: desk8(ris_mode="active", power_split=EPS_DEFAULT, ris_policy="random"),
    **{f"eps_{e}": (lambda e=e: desk8(ris_mode="active", power_split=e)) for e in EPS_CURVE},
    **{f"passive_nq{b}": (lambda b=b: desk8(phase_bits=b)) for b in (3, 4)},
    **{f"active_nq{b}": (lambda b=b: desk8(ris_mode="active", power_split=EPS_DEFAULT, phase_bits=b))
       for b in (3, 4)},
}


def drops(name, metric):
    """Drop results of a variant, computed once per (variant, metric) and shared."""
    key = (name, metric)
    if key not in _CACHE:
        t0 = time.perf_counter()
        cfg = VARIANTS[name]()
        _CACHE[key] = run_variant(cfg, N_DROPS, cfg.rng_seed, (metric,))
        _ELAPSED[0] += time.perf_counter() - t0
    return _CACHE[key]


def median_se(name, metric):
    res = drops(name, metric)
    if metric == "pcsi":
        return float(np.median(np.concatenate([d.pcsi_se.ravel() for d in res])))
    return float(np.median(np.concatenate([d.lb_se for d in res])))


def mean_min_se(name, metric):
    res = drops(name, metric)
    return float(np.mean([d.pcsi_min if metric == "pcsi" else d.lb_min for d in res]))


@pytest.mark.slow
def test_c8a_optimized_beats_random(accept):
    parts, ok = [], True
    for mode in ("passive", "active"):
        opt = np.array([d.lb_min for d in drops(mode, "lb")])
        rnd = np.array([d.lb_min for d in drops(f"{mode}_random", "lb")])
        frac = float(np.mean(opt > rnd))
        ok &= frac >= 0.95
        parts.append(f"{mode}: {frac:.1%} of drops (median min-SE opt={np.median(opt):.3f} "
                     f"random={np.median(rnd):.3f})")
    accept("8a optimized > random (LB, >=95% drops)", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_c8b_median_ordering(accept):
    parts, ok = [], True
    for metric in ("pcsi", "lb"):
        a, p, l = (median_se(n, metric) for n in ("active", "passive", "legacy"))
        ok &= a >= p >= l
        parts.append(f"{metric}: active={a:.3f} passive={p:.3f} legacy={l:.3f}")
    accept("8b median active >= passive >= legacy", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_c8c_min_se_flat_in_epsilon(accept):
    curve = np.array([mean_min_se(f"eps_{e}", "lb") for e in EPS_CURVE])
    ratio = float(curve.max() / curve.min())
    ok = ratio < 1.5
    pts = " ".join(f"{e}:{v:.3f}" for e, v in zip(EPS_CURVE, curve))
    accept("8c min-SE vs epsilon flat (LB)", ok, f"{pts} max/min={ratio:.3f}")
    assert ok


@pytest.mark.slow
def test_c8d_quantization(accept):
    parts, ok = [], True
    for mode in ("passive", "active"):
        cont = median_se(mode, "pcsi")
        q4, q3 = median_se(f"{mode}_nq4", "pcsi"), median_se(f"{mode}_nq3", "pcsi")
        drop4 = 1 - q4 / cont
        ok &= abs(drop4) <= 0.10 and q3 < q4
        parts.append(f"{mode}: continuous={cont:.3f} nq4={q4:.3f} ({-drop4:+.1%}) nq3={q3:.3f}")
    accept("8d quantization (PCSI)", ok, "; ".join(parts))
    assert ok


NEEDED = ([(n, m) for n in ("legacy", "passive", "active") for m in ("pcsi", "lb")]
          + [("passive_random", "lb"), ("active_random", "lb")]
          + [(f"eps_{e}", "lb") for e in EPS_CURVE]
          + [(f"{mode}_nq{b}", "pcsi") for mode in ("passive", "active") for b in (3, 4)])


@pytest.mark.slow
def test_c8_runtime(accept):
    for name, metric in NEEDED:
        drops(name, metric)
    ok = _ELAPSED[0] < 1800
    accept("8 total runtime", ok, f"{_ELAPSED[0]:.0f}s for {len(_CACHE)} variant runs "
                                  f"x {N_DROPS} drops")
    assert ok


# ------------------------------------------------------------------ 9. determinism

def test_c9_determinism(accept, tmp_path):
    cfg = preset("desk", n_fading=3, ris_mode="active", power_split=0.3)
    run_campaign(Campaign(cfg, "cdf_compare", 4, tmp_path / "w1", seed=9, workers=1))
    man = load_manifest(tmp_path / "w1" / "manifest.json")
    run_campaign(Campaign.from_manifest(man, tmp_path / "w3", workers=3))
    from threadpoolctl import threadpool_limits
    with threadpool_limits(4):
        run_campaign(Campaign.from_manifest(man, tmp_path / "r1", workers=1))
    names = sorted(p.name for p in (tmp_path / "w1").iterdir())
    same = all((tmp_path / "w1" / n).read_bytes() == (tmp_path / d / n).read_bytes()
               for n in names for d in ("w3", "r1"))
    accept("9 determinism", same, f"{len(names)} files compared across workers=1/3 and rerun")
    assert same
