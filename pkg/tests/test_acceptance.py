"""Acceptance gate: one test per criterion, one printed verdict line each.

Each test computes its result first, prints a single PASS/FAIL line on the
real terminal (bypassing capture), then asserts.
"""

import json
import math

import numpy as np
import pytest

from bellab.core import QmSource, chsh_statistic, correlation_from_counts, \
    correlation_stderr_from_counts, AnalyzerAngle, SettingsQuad, quad_from_phi
from bellab import bounds, lhv, montecarlo
from bellab.cli import main as cli_main

PHI_MAX = 2 * math.pi / 3


def _report(capsys, num, name, ok, detail=""):
    with capsys.disabled():
        print(f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num:02d} ({name}) failed{': ' + detail if detail else ''}"


def _g_closed_form(eta, F, phi):
    return 0.25 * eta * F * (3 * math.cos(phi) - math.cos(3 * phi) - 2)


def test_criterion_01_closed_form_on_grid(capsys):
    # six-term statistic assembled from full joint distributions agrees
    # with its closed form on a 256-point grid for six (eta, F) combos
    phis = np.linspace(0.0, PHI_MAX, 256)
    worst = 0.0
    for eta in (1.0, 0.5, 0.01):
        for F in (1.0, 0.9):
            src = QmSource(F=F, eta_overall=eta)
            for phi in phis:
                dists = bounds.qm_distributions_for_quad(
                    src, quad_from_phi(phi))
                got = bounds.g_statistic(dists, 1, 1).value
                worst = max(worst, abs(got - _g_closed_form(eta, F, phi)))
    _report(capsys, 1, "closed-form grid equality", worst <= 1e-12)


def test_criterion_02_efficiency_independent_violation(capsys):
    grids = {}
    endpoints = []
    for eta in (1e-3, 1e-1, 1.0):
        res = bounds.scan_violation(QmSource(eta_overall=eta), phi_grid=256)
        grids[eta] = tuple(pt.violated for pt in res.points)
        endpoints.append(res.violation_intervals[-1][1])
    same_set = len(set(grids.values())) == 1
    target = math.acos((math.sqrt(3) - 1) / 2)
    endpoint_ok = all(abs(e - target) <= 1e-6 for e in endpoints)
    _report(capsys, 2, "efficiency-independent violation set",
            same_set and endpoint_ok)


def test_criterion_03_maximum_violation(capsys):
    dists = bounds.qm_distributions_for_quad(QmSource(),
                                             quad_from_phi(math.pi / 4))
    got = bounds.g_statistic(dists, 1, 1).value
    target = (2 * math.sqrt(2) - 2) / 4
    _report(capsys, 3, "maximum violation at quarter spacing",
            abs(got - target) <= 1e-12)


def test_criterion_04_extreme_point_tables(capsys):
    rng = np.random.Generator(np.random.Philox(key=4))
    worst = 0.0
    for _ in range(10_000):
        rows = bounds.enumerate_extremes(rng.random(6))
        worst = max(worst,
                    max(abs(r.g_numeric - r.g_symbolic) for r in rows))
    ideal = bounds.enumerate_extremes((1.0,) * 6)
    ideal_max = max(r.g_numeric for r in ideal)
    _report(capsys, 4, "extreme-point table verification",
            worst <= 1e-12 and ideal_max == 0.0)


def test_criterion_05_three_setting_violation(capsys):
    dists = bounds.qm_distributions_for_three_settings(QmSource(),
                                                       math.pi / 3)
    got = bounds.f_statistic(dists, 1, 1).value
    _report(capsys, 5, "three-setting statistic at sixty degrees",
            abs(got - 0.125) <= 1e-12 and got > 0.0)


def test_criterion_06_btcc_dichotomy(capsys):
    det = lhv.btcc_check(lhv.DetSignModel(), AnalyzerAngle(0.3),
                         n_samples=100_000, seed=0)
    # tighter mass tolerance so that near-deterministic leakage below
    # 1e-4 per lambda is still counted as stochastic mass
    mal = lhv.btcc_check(lhv.MalusModel(), AnalyzerAngle(0.3),
                         n_samples=1_000_000, tol=1e-4, seed=0)
    ok = (det.verdict == lhv.VERDICT_ACHIEVED
          and det.c_same == 1.0 and det.nondeterministic_mass == 0.0
          and mal.verdict == lhv.VERDICT_FAILED_STOCHASTIC
          and abs(mal.c_same - 0.5) <= 0.01
          and mal.nondeterministic_mass >= 0.99)
    _report(capsys, 6, "perfect-correlation dichotomy", ok)


def _random_quads(n, key=42):
    rng = np.random.Generator(np.random.Philox(key=key))
    quads = []
    for _ in range(n):
        a, b, ap, bp = rng.random(4) * math.pi
        quads.append(SettingsQuad(AnalyzerAngle(a), AnalyzerAngle(b),
                                  AnalyzerAngle(ap), AnalyzerAngle(bp)))
    return quads


def test_criterion_07_classical_bounds_property(capsys):
    # Known limitation, deliberately not papered over: the six-term bound
    # is a theorem only for models whose same-direction outcome
    # probabilities hit their extremes jointly on both wings. The Malus
    # built-ins sample the two wings independently given lambda, fall
    # outside that class, and genuinely push the statistic above zero on
    # roughly eight percent of random quads (exact quadrature confirms the
    # Monte Carlo values). This check therefore fails whenever the fixed
    # quad draw includes such a quad; see the deterministic sign models
    # for the class where the bound does hold.
    models = ("det_sign", "det_sign_lossy(0.8)", "malus_stochastic",
              "malus_lossy(0.8)")
    failures = []
    for mi, name in enumerate(models):
        model = lhv.builtin_model(name)
        for qi, quad in enumerate(_random_quads(20)):
            cfg = montecarlo.ExperimentConfig(
                source=model,
                setting_pairs=montecarlo.quad_setting_pairs(quad),
                pairs_per_setting=100_000,
                seed=1000 + 37 * mi + qi)
            counts = montecarlo.run_experiment(cfg)
            cs, ses = {}, {}
            for lab in ("ab", "apb", "apbp", "abp"):
                cs[lab] = correlation_from_counts(counts, lab)
                ses[lab] = correlation_stderr_from_counts(counts, lab)
            s = chsh_statistic(cs["ab"], cs["apb"], cs["apbp"], cs["abp"])
            s_se = math.sqrt(sum(v * v for v in ses.values()))
            g = montecarlo.g_statistic_from_counts(counts, 1, 1)
            ratio = montecarlo.ratio_statistic(counts, 1, 1)
            if abs(s) > 2.0 + 5.0 * s_se:
                failures.append(f"{name} quad {qi}: |CHSH| = {s:.4f}")
            if not (-1.0 - 5.0 * g.stderr <= g.value <= 5.0 * g.stderr):
                failures.append(f"{name} quad {qi}: G = {g.value:.4f}"
                                f" (stderr {g.stderr:.4f})")
            if ratio.ratio > 1.0 + 3.0 * ratio.stderr:
                failures.append(f"{name} quad {qi}: ratio = "
                                f"{ratio.ratio:.4f}")
    _report(capsys, 7, "classical bounds over random quads",
            not failures, "; ".join(failures))


def test_criterion_08_simulated_violation_at_low_efficiency(capsys):
    cfg = montecarlo.ExperimentConfig(
        source=QmSource(eta_overall=0.1),
        setting_pairs=montecarlo.quad_setting_pairs(quad_from_phi(math.pi / 4)),
        pairs_per_setting=1_000_000,
        seed=8)
    rep = montecarlo.ratio_statistic(montecarlo.run_experiment(cfg), 1, 1)
    target = (1 + math.sqrt(2)) / 2
    ok = (abs(rep.ratio - target) <= 3 * rep.stderr
          and rep.stderr < 0.01 and rep.violated)
    _report(capsys, 8, "simulated violation at ten percent efficiency", ok)


def test_criterion_09_homogeneity_tester_power(capsys):
    quad = quad_from_phi(math.pi / 4)
    pairs = montecarlo.quad_setting_pairs(quad)

    def rate(source, n, predicate):
        hits = 0
        for seed in range(100):
            cfg = montecarlo.ExperimentConfig(source=source,
                                              setting_pairs=pairs,
                                              pairs_per_setting=n,
                                              seed=seed)
            rep = montecarlo.assumption_a_test(
                montecarlo.run_experiment(cfg))
            hits += predicate(rep)
        return hits / 100.0

    pass_qm = rate(QmSource(eta_overall=0.8), 100_000, lambda r: r.passed)
    pass_lhv = rate(lhv.builtin_model("det_sign_lossy(0.8)"), 100_000,
                    lambda r: r.passed)
    fail_biased = rate(lhv.builtin_model("direction_biased_loss(0.8,0.1)"),
                       1_000_000, lambda r: not r.passed)
    ok = pass_qm >= 0.95 and pass_lhv >= 0.95 and fail_biased >= 0.99
    _report(capsys, 9, "detection-homogeneity tester power", ok)


def test_criterion_10_byte_identical_reruns(capsys, tmp_path):
    cfg_text = ("source = malus_lossy(0.9)\n"
                "phi = 0.7853981633974483\n"
                "pairs_per_setting = 150000\n"
                "seed = 5\n")
    outputs = []
    for tag, workers in (("r1", 1), ("r2", 1), ("w4", 4)):
        cfg = tmp_path / f"{tag}.cfg"
        cfg.write_text(cfg_text + f"workers = {workers}\n")
        rc = cli_main(["simulate", str(cfg), "--out-prefix",
                       str(tmp_path / tag)])
        assert rc == 0
        capsys.readouterr()
        counts = (tmp_path / f"{tag}_counts.csv").read_bytes()
        report = (tmp_path / f"{tag}_report.json").read_bytes()
        w = str(workers).encode()
        outputs.append((counts.replace(b"workers=" + w, b"workers=X"),
                        report.replace(b'"workers": ' + w, b'"workers": X')))
    scans = []
    for _ in range(2):
        rc = cli_main(["scan", "--grid", "64", "--eta", "0.4",
                       "--out", str(tmp_path / "scan.csv")])
        assert rc == 0
        scans.append((capsys.readouterr().out,
                      (tmp_path / "scan.csv").read_bytes()))
    ok = (outputs[0] == outputs[1] == outputs[2] and scans[0] == scans[1])
    _report(capsys, 10, "byte-identical deterministic reruns", ok)
