"""Event-level simulation of Bell photonic experiments.

For each setting pair a fixed number of photon pairs is emitted. A quantum
source samples the 3x3 outcome cell directly from its full distribution;
a hidden-variable source draws lambda, samples each wing's outcome
independently given lambda (locality by construction), then applies
detector loss per wing. Counts are accumulated per chunk with
counter-derived seeds, so results are bit-identical no matter how chunks
are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .core import (AnalyzerAngle, CountsTable, JointDistribution, PairCounts,
                   QmSource, SettingsQuad)
from .lhv import LhvModel, _chunk_rng

__all__ = [
    "ExperimentConfig",
    "RatioReport",
    "AssumptionAReport",
    "quad_setting_pairs",
    "chsh_setting_pairs",
    "three_setting_pairs",
    "run_experiment",
    "probabilities_from_counts",
    "ratio_statistic",
    "g_statistic_from_counts",
    "assumption_a_test",
]

_CHUNK = 1 << 16


def quad_setting_pairs(quad: SettingsQuad):
    """The six labelled setting pairs the G statistic needs."""
    a, b, ap, bp = quad.a, quad.b, quad.a_prime, quad.b_prime
    return (
        ("ab", a, b),
        ("abp", a, bp),
        ("apb", ap, b),
        ("apbp", ap, bp),
        ("apap", ap, ap),
        ("bb", b, b),
    )


def chsh_setting_pairs(quad: SettingsQuad):
    """The four labelled setting pairs the CHSH statistic needs."""
    a, b, ap, bp = quad.a, quad.b, quad.a_prime, quad.b_prime
    return (
        ("ab", a, b),
        ("apb", ap, b),
        ("apbp", ap, bp),
        ("abp", a, bp),
    )


def three_setting_pairs(a: AnalyzerAngle, b: AnalyzerAngle,
                        a_prime: AnalyzerAngle):
    """The four labelled setting pairs the three-setting statistic needs."""
    return (
        ("ab", a, b),
        ("apb", a_prime, b),
        ("apa", a_prime, a),
        ("apap", a_prime, a_prime),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulated experiment campaign.

    ``source`` is either a QmSource or an LhvModel. ``efficiency`` is the
    per-wing detector efficiency applied on top of whatever losses the
    source itself carries: a constant, or a callable of the analyzer
    direction (direction-dependent detectors, for stress-testing the
    homogeneity check).
    """

    source: object
    setting_pairs: Sequence
    pairs_per_setting: int
    efficiency: float | Callable[[AnalyzerAngle], float] = 1.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.pairs_per_setting < 1:
            raise ValueError("pairs_per_setting must be >= 1")
        if not isinstance(self.source, (QmSource, LhvModel)):
            raise ValueError("source must be a QmSource or an LhvModel")
        if not callable(self.efficiency):
            e = float(self.efficiency)
            if not (0.0 <= e <= 1.0):
                raise ValueError(f"efficiency {e} outside [0, 1]")

    def wing_efficiency(self, direction: AnalyzerAngle) -> float:
        e = self.efficiency(direction) if callable(self.efficiency) \
            else float(self.efficiency)
        if not (0.0 <= e <= 1.0):
            raise ValueError(f"efficiency {e} at {direction!r} outside [0, 1]")
        return e


def _qm_chunk_counts(dist: JointDistribution, m: int,
                     rng: np.random.Generator) -> np.ndarray:
    return rng.multinomial(m, dist.table.reshape(-1)).reshape(3, 3)


def _sample_outcomes(pp: np.ndarray, pm: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    u = rng.random(pp.shape[0])
    return np.where(u < pp, 1, np.where(u < pp + pm, -1, 0))


def _lhv_chunk_counts(model: LhvModel, a: AnalyzerAngle, b: AnalyzerAngle,
                      e1: float, e2: float, m: int,
                      rng: np.random.Generator) -> np.ndarray:
    lam = model.sample_hidden(rng, m)
    pp1, pm1, _ = model.prob_arrays(1, a, lam)
    pp2, pm2, _ = model.prob_arrays(2, b, lam)
    o1 = _sample_outcomes(pp1, pm1, rng)
    o2 = _sample_outcomes(pp2, pm2, rng)
    if e1 < 1.0:
        o1 = np.where(rng.random(m) < e1, o1, 0)
    if e2 < 1.0:
        o2 = np.where(rng.random(m) < e2, o2, 0)
    # outcome -> index: +1 -> 0, -1 -> 1, 0 -> 2
    i1 = np.where(o1 == 1, 0, np.where(o1 == -1, 1, 2))
    i2 = np.where(o2 == 1, 0, np.where(o2 == -1, 1, 2))
    return np.bincount(i1 * 3 + i2, minlength=9).reshape(3, 3)


def _run_pair(cfg: ExperimentConfig, pair_index: int, label: str,
              a: AnalyzerAngle, b: AnalyzerAngle) -> PairCounts:
    n = cfg.pairs_per_setting
    e1 = cfg.wing_efficiency(a)
    e2 = cfg.wing_efficiency(b)
    if isinstance(cfg.source, QmSource):
        from .core import qm_full_distribution
        dist = qm_full_distribution(cfg.source, a, b)
        if e1 < 1.0 or e2 < 1.0:
            dist = dist.thinned(e1, e2)

    def one_chunk(chunk_idx: int) -> np.ndarray:
        start = chunk_idx * _CHUNK
        m = min(_CHUNK, n - start)
        rng = _chunk_rng(cfg.seed, 100 + pair_index, chunk_idx)
        if isinstance(cfg.source, QmSource):
            return _qm_chunk_counts(dist, m, rng)
        return _lhv_chunk_counts(cfg.source, a, b, e1, e2, m, rng)

    n_chunks = (n + _CHUNK - 1) // _CHUNK
    if cfg.workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            tables = list(pool.map(one_chunk, range(n_chunks)))
    else:
        tables = [one_chunk(i) for i in range(n_chunks)]
    total = np.zeros((3, 3), dtype=np.int64)
    for t in tables:  # integer merge: exact and order-independent
        total += t
    return PairCounts(label=label, a=a, b=b, table=total, n_emitted=n)


def run_experiment(cfg: ExperimentConfig) -> CountsTable:
    """Simulate every setting pair of the config; deterministic given seed."""
    pairs = []
    for j, (label, a, b) in enumerate(cfg.setting_pairs):
        pairs.append(_run_pair(cfg, j, label, a, b))
    return CountsTable(pairs)


def probabilities_from_counts(counts: CountsTable) -> dict:
    """Empirical joint distributions: each cell divided by pairs emitted."""
    out = {}
    for pc in counts:
        if pc.n_emitted <= 0:
            raise ValueError(f"pair {pc.label!r} has no emissions")
        out[pc.label] = JointDistribution(pc.table / pc.n_emitted)
    return out


@dataclass(frozen=True)
class RatioReport:
    """Count-ratio statistic: raw recorded events only, total emission
    cancels because every pair saw the same number of emitted photons."""

    numerator: int
    denominator: int
    ratio: float
    stderr: float
    violated: bool
    r: int
    q: int


def _binom_var(count: int, n: int) -> float:
    p = count / n
    return n * p * (1.0 - p)


def ratio_statistic(counts: CountsTable, r: int, q: int) -> RatioReport:
    """Eq-of-counts form of the six-term statistic, bounded by 1 classically.

    Requires equal emission counts across the six pairs (otherwise the
    total-emission normalization would not cancel) and a nonzero
    denominator.
    """
    labels = ("ab", "abp", "apb", "apbp", "apap", "bb")
    pcs = {lab: counts.pair(lab) for lab in labels}
    n_emit = {lab: pc.n_emitted for lab, pc in pcs.items()}
    if len(set(n_emit.values())) != 1:
        raise ValueError(
            f"unequal pairs_per_setting across the six pairs: {n_emit}; "
            "the total-emission count would not cancel")
    n = pcs["ab"].n_emitted
    num_terms = (
        (pcs["ab"].count(r, q), 1),
        (pcs["abp"].count(r, q), -1),
        (pcs["apb"].count(r, q), 1),
        (pcs["apbp"].count(r, q), 1),
    )
    den_terms = (pcs["apap"].count(r, r), pcs["bb"].count(q, q))
    numerator = sum(c * s for c, s in num_terms)
    denominator = sum(den_terms)
    if denominator == 0:
        raise ValueError("zero denominator: no same-direction concordant "
                         "coincidences recorded")
    ratio = numerator / denominator
    var_num = sum(_binom_var(c, n) for c, _ in num_terms)
    var_den = sum(_binom_var(c, n) for c in den_terms)
    var_ratio = (var_num / denominator**2
                 + numerator**2 * var_den / denominator**4)
    stderr = math.sqrt(var_ratio)
    return RatioReport(numerator=numerator, denominator=denominator,
                       ratio=ratio, stderr=stderr,
                       violated=ratio > 1.0 + 3.0 * stderr, r=r, q=q)


def g_statistic_from_counts(counts: CountsTable, r: int, q: int):
    """Six-term statistic from empirical probabilities, with a binomial
    standard error attached."""
    from .bounds import GReport, g_statistic

    dists = probabilities_from_counts(counts)
    rep = g_statistic(dists, r, q)
    var = 0.0
    for lab, (rr, qq) in (("ab", (r, q)), ("abp", (r, q)), ("apb", (r, q)),
                          ("apbp", (r, q)), ("apap", (r, r)), ("bb", (q, q))):
        pc = counts.pair(lab)
        p = pc.count(rr, qq) / pc.n_emitted
        var += p * (1.0 - p) / pc.n_emitted
    return GReport(value=rep.value, components=rep.components,
                   bound_violated=rep.bound_violated,
                   stderr=math.sqrt(var))


@dataclass(frozen=True)
class AssumptionAReport:
    """Direction-independence check of the per-wing detection rates.

    Chi-square homogeneity of detected-vs-lost proportions across the
    distinct analyzer directions of each wing; the two wings' statistics
    add into one combined test.
    """

    wing_rows: dict
    per_wing: dict
    statistic: float
    dof: int
    p_value: float
    passed: bool
    significance: float


def _direction_key(angle: AnalyzerAngle) -> float:
    return round(angle.value, 12)


def assumption_a_test(counts: CountsTable,
                      significance: float = 0.01) -> AssumptionAReport:
    """Test whether detection probabilities depend on analyzer direction."""
    wing_rows = {1: {}, 2: {}}
    for pc in counts:
        for wing, angle in ((1, pc.a), (2, pc.b)):
            key = _direction_key(angle)
            det, emit = wing_rows[wing].get(key, (0, 0))
            if wing == 1:
                detected = int(pc.table[:2, :].sum())
            else:
                detected = int(pc.table[:, :2].sum())
            wing_rows[wing][key] = (det + detected, emit + pc.n_emitted)
    for wing in (1, 2):
        if len(wing_rows[wing]) < 2:
            raise ValueError(
                f"insufficient directions on wing {wing}: need >= 2 distinct "
                f"analyzer directions, got {len(wing_rows[wing])}")

    per_wing = {}
    stat_total = 0.0
    dof_total = 0
    for wing in (1, 2):
        rows = sorted(wing_rows[wing].items())
        detected = np.array([d for _, (d, _) in rows], dtype=float)
        lost = np.array([e - d for _, (d, e) in rows], dtype=float)
        k = len(rows)
        if detected.sum() == 0.0 or lost.sum() == 0.0:
            # no variation possible: trivially homogeneous
            stat, p, dof = 0.0, 1.0, k - 1
        else:
            stat, p, dof, _ = stats.chi2_contingency(
                np.vstack([detected, lost]), correction=False)
        per_wing[wing] = {"statistic": float(stat), "dof": int(dof),
                          "p_value": float(p)}
        stat_total += float(stat)
        dof_total += int(dof)
    p_value = float(stats.chi2.sf(stat_total, dof_total))
    return AssumptionAReport(
        wing_rows={w: sorted(rows.items()) for w, rows in wing_rows.items()},
        per_wing=per_wing,
        statistic=stat_total,
        dof=dof_total,
        p_value=p_value,
        passed=p_value >= significance,
        significance=significance,
    )
