"""Shared domain types, analyzer-angle arithmetic, and the quantum-mechanical
prediction engine for polarization-entangled photon pairs with inefficient
detection.

Conventions used throughout the package:

* analyzer directions are linear-polarization *directions*, i.e. angles
  modulo pi (a filter at 170 degrees is the same filter as at -10 degrees);
* measurement outcomes are trinary: +1 (photon passes), -1 (photon is
  blocked), 0 (photon is never detected);
* joint outcome tables are 3x3, indexed in the fixed order (+1, -1, 0) on
  each wing, and always normalize to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PASS",
    "BLOCK",
    "NO_DETECTION",
    "OUTCOMES",
    "NORM_TOL",
    "AnalyzerAngle",
    "ProbTriple",
    "SettingsQuad",
    "JointDistribution",
    "PairCounts",
    "CountsTable",
    "QmSource",
    "NoCoincidencesError",
    "outcome_index",
    "qm_joint_probability",
    "qm_full_distribution",
    "quad_from_phi",
    "correlation_from_counts",
    "correlation_stderr_from_counts",
    "chsh_statistic",
]

PASS = 1
BLOCK = -1
NO_DETECTION = 0
OUTCOMES = (PASS, BLOCK, NO_DETECTION)

_OUTCOME_INDEX = {PASS: 0, BLOCK: 1, NO_DETECTION: 2}

#: absolute tolerance for probability normalization checks
NORM_TOL = 1e-12


def outcome_index(r: int) -> int:
    """Row/column index of an outcome in a 3x3 table (order +1, -1, 0)."""
    try:
        return _OUTCOME_INDEX[r]
    except KeyError:
        raise ValueError(f"outcome must be one of {OUTCOMES}, got {r!r}") from None


class NoCoincidencesError(ValueError):
    """Raised when a correlation is requested but no coincidences were recorded."""


@dataclass(frozen=True)
class AnalyzerAngle:
    """A linear-polarization direction in radians, canonical in [0, pi).

    Constructing from v and from v + pi yields equal objects; polarization
    correlations depend on directions only through cos 2(a - b), which is
    invariant under that identification.
    """

    value: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if not math.isfinite(v):
            raise ValueError("analyzer angle must be finite")
        v = v % math.pi
        if v >= math.pi:
            # v % pi can round up to pi for tiny negative inputs
            v = 0.0
        object.__setattr__(self, "value", v)

    def separation(self, other: "AnalyzerAngle") -> float:
        """Folded direction distance in [0, pi/2].

        Folding d -> pi - d leaves cos 2d unchanged, so this is the full
        physical content of the angular difference.
        """
        d = abs(self.value - other.value)
        d = min(d, math.pi - d)
        return d

    def cos2(self, other: "AnalyzerAngle") -> float:
        """cos 2(self - other), the quantity every correlation formula uses."""
        return math.cos(2.0 * (self.value - other.value))

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"AnalyzerAngle({self.value:.12g})"


@dataclass(frozen=True)
class ProbTriple:
    """Outcome probabilities (pass, block, no-detection) for one photon.

    The detection mass p_plus + p_minus equals 1 - p_zero by construction;
    it is the per-hidden-variable inefficiency measure used by the bounds
    machinery.
    """

    p_plus: float
    p_minus: float
    p_zero: float

    def __post_init__(self) -> None:
        for name, p in (("p_plus", self.p_plus), ("p_minus", self.p_minus),
                        ("p_zero", self.p_zero)):
            if not (-NORM_TOL <= p <= 1.0 + NORM_TOL):
                raise ValueError(f"{name}={p} outside [0, 1]")
        s = self.p_plus + self.p_minus + self.p_zero
        if abs(s - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {s}, expected 1")

    @property
    def detection_mass(self) -> float:
        return self.p_plus + self.p_minus

    def prob(self, r: int) -> float:
        return (self.p_plus, self.p_minus, self.p_zero)[outcome_index(r)]

    def expectation(self) -> float:
        """p_plus - p_minus (the per-lambda average outcome)."""
        return self.p_plus - self.p_minus


@dataclass(frozen=True)
class SettingsQuad:
    """The four analyzer directions of a two-setting-per-wing experiment."""

    a: AnalyzerAngle
    b: AnalyzerAngle
    a_prime: AnalyzerAngle
    b_prime: AnalyzerAngle


def quad_from_phi(phi: float) -> SettingsQuad:
    """Build the standard equally-spaced quad for a spacing parameter phi.

    Concrete assignment (one of infinitely many satisfying the distance
    constraints, fixed here for reproducibility):

        a = phi/2,  b = 0,  a' = -phi/2,  b' = -phi     (all mod pi)

    so that |a - b| = |a' - b| = |a' - b'| = phi/2 and |a - b'| = 3 phi/2
    in raw (pre-folding) arithmetic.
    """
    if not (0.0 <= phi <= 2.0 * math.pi / 3.0):
        raise ValueError(f"phi={phi} outside [0, 2*pi/3]")
    return SettingsQuad(
        a=AnalyzerAngle(phi / 2.0),
        b=AnalyzerAngle(0.0),
        a_prime=AnalyzerAngle(-phi / 2.0),
        b_prime=AnalyzerAngle(-phi),
    )


@dataclass(frozen=True)
class QmSource:
    """Quantum source of polarization-entangled photon pairs.

    correlation_sign selects the parallel-correlated (+1) or
    anti-correlated (-1) family; F in [0, 1] is the correlation visibility
    and eta_overall in (0, 1] the overall pair-detection efficiency of the
    apparatus.
    """

    correlation_sign: int = 1
    F: float = 1.0
    eta_overall: float = 1.0

    def __post_init__(self) -> None:
        if self.correlation_sign not in (1, -1):
            raise ValueError("correlation_sign must be +1 or -1")
        if not (0.0 <= self.F <= 1.0):
            raise ValueError(f"F={self.F} outside [0, 1]")
        if not (0.0 < self.eta_overall <= 1.0):
            raise ValueError(f"eta_overall={self.eta_overall} outside (0, 1]")


class JointDistribution:
    """3x3 joint outcome probability table for one setting pair.

    Rows index the first wing's outcome, columns the second wing's, in the
    fixed order (+1, -1, 0). Entries sum to 1 within NORM_TOL.
    """

    __slots__ = ("table",)

    def __init__(self, table) -> None:
        t = np.asarray(table, dtype=float)
        if t.shape != (3, 3):
            raise ValueError(f"table must be 3x3, got shape {t.shape}")
        if np.any(t < -NORM_TOL) or np.any(t > 1.0 + NORM_TOL):
            raise ValueError("table entries outside [0, 1]")
        if abs(float(t.sum()) - 1.0) > NORM_TOL:
            raise ValueError(f"table sums to {t.sum()}, expected 1")
        self.table = t
        self.table.setflags(write=False)

    def prob(self, r: int, q: int) -> float:
        return float(self.table[outcome_index(r), outcome_index(q)])

    def detected_mass(self) -> float:
        """Probability that both photons are detected (any +-1 outcomes)."""
        return float(self.table[:2, :2].sum())

    def no_detection_prob(self, wing: int) -> float:
        """Marginal probability of outcome 0 on the given wing (1 or 2)."""
        if wing == 1:
            return float(self.table[2, :].sum())
        if wing == 2:
            return float(self.table[:, 2].sum())
        raise ValueError("wing must be 1 or 2")

    def thinned(self, keep1: float, keep2: float) -> "JointDistribution":
        """Apply extra independent per-wing detector loss.

        A detected outcome on wing k survives with probability keep_k and
        is otherwise recorded as 0.
        """
        for k in (keep1, keep2):
            if not (0.0 <= k <= 1.0):
                raise ValueError(f"keep probability {k} outside [0, 1]")
        t = self.table
        out = np.zeros((3, 3))
        out[:2, :2] = t[:2, :2] * keep1 * keep2
        # wing-2 outcome lost (or already 0)
        out[:2, 2] = keep1 * (t[:2, :2].sum(axis=1) * (1.0 - keep2) + t[:2, 2])
        out[2, :2] = keep2 * (t[:2, :2].sum(axis=0) * (1.0 - keep1) + t[2, :2])
        out[2, 2] = 1.0 - out[:2, :2].sum() - out[:2, 2].sum() - out[2, :2].sum()
        return JointDistribution(out)


def qm_joint_probability(src: QmSource, r: int, q: int,
                         a: AnalyzerAngle, b: AnalyzerAngle) -> float:
    """Joint probability of detected outcomes (r, q) at directions (a, b).

    (eta/4) [1 + s r q F cos 2(a - b)] with s the correlation sign. Only
    detected outcomes are admitted; the non-detection cells are completed
    by qm_full_distribution.
    """
    if r not in (1, -1) or q not in (1, -1):
        raise ValueError("r and q must be +1 or -1 (non-detection cells "
                         "are derived, not predicted directly)")
    s = src.correlation_sign
    return 0.25 * src.eta_overall * (1.0 + s * r * q * src.F * a.cos2(b))


def qm_full_distribution(src: QmSource, a: AnalyzerAngle,
                         b: AnalyzerAngle) -> JointDistribution:
    """Full 3x3 outcome distribution including non-detection cells.

    Losses are modelled as independent per-wing inefficiency sqrt(eta) on
    each wing, so the pair-detection efficiency is eta_overall, the
    non-detection cell factorizes, and each wing's detection probability is
    direction-independent.
    """
    root_eta = math.sqrt(src.eta_overall)
    lost = 1.0 - root_eta
    t = np.zeros((3, 3))
    for r in (PASS, BLOCK):
        for q in (PASS, BLOCK):
            t[outcome_index(r), outcome_index(q)] = qm_joint_probability(
                src, r, q, a, b)
    # singles are unpolarized: each detected wing shows +-1 with prob 1/2
    for r in (PASS, BLOCK):
        t[outcome_index(r), 2] = 0.5 * root_eta * lost
        t[2, outcome_index(r)] = 0.5 * root_eta * lost
    t[2, 2] = lost * lost
    return JointDistribution(t)


@dataclass(frozen=True)
class PairCounts:
    """Event counts for one setting pair: 3x3 outcome table + emitted pairs."""

    label: str
    a: AnalyzerAngle
    b: AnalyzerAngle
    table: np.ndarray
    n_emitted: int

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=np.int64)
        if t.shape != (3, 3):
            raise ValueError(f"counts table must be 3x3, got {t.shape}")
        if np.any(t < 0):
            raise ValueError("counts must be nonnegative")
        if int(t.sum()) != int(self.n_emitted):
            raise ValueError(
                f"counts sum {int(t.sum())} != n_emitted {self.n_emitted}")
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "n_emitted", int(self.n_emitted))
        t.setflags(write=False)

    def count(self, r: int, q: int) -> int:
        return int(self.table[outcome_index(r), outcome_index(q)])


class CountsTable:
    """Ordered collection of PairCounts, addressable by label or index."""

    def __init__(self, pairs) -> None:
        self.pairs = tuple(pairs)
        self._by_label = {}
        for pc in self.pairs:
            if pc.label in self._by_label:
                raise ValueError(f"duplicate pair label {pc.label!r}")
            self._by_label[pc.label] = pc

    def pair(self, key) -> PairCounts:
        if isinstance(key, str):
            try:
                return self._by_label[key]
            except KeyError:
                raise KeyError(
                    f"no setting pair labelled {key!r}; have "
                    f"{sorted(self._by_label)}") from None
        return self.pairs[key]

    def labels(self):
        return tuple(pc.label for pc in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def correlation_from_counts(counts: CountsTable, pair) -> float:
    """Effective (post-selected) correlation from coincidence counts.

    (N++ + N-- - N-+ - N+-) / (N++ + N-- + N-+ + N+-); outcome-0 cells are
    excluded, so this is the fair-sampling estimator.
    """
    pc = counts.pair(pair)
    npp = pc.count(PASS, PASS)
    nmm = pc.count(BLOCK, BLOCK)
    npm = pc.count(PASS, BLOCK)
    nmp = pc.count(BLOCK, PASS)
    denom = npp + nmm + npm + nmp
    if denom == 0:
        raise NoCoincidencesError(
            f"no coincidences recorded for pair {pc.label!r}")
    return (npp + nmm - nmp - npm) / denom


def correlation_stderr_from_counts(counts: CountsTable, pair) -> float:
    """Standard error of the effective correlation (binomial propagation)."""
    pc = counts.pair(pair)
    n_coinc = int(pc.table[:2, :2].sum())
    if n_coinc == 0:
        raise NoCoincidencesError(
            f"no coincidences recorded for pair {pc.label!r}")
    c = correlation_from_counts(counts, pair)
    return math.sqrt(max(1.0 - c * c, 0.0) / n_coinc)


def chsh_statistic(c_ab: float, c_apb: float, c_apbp: float,
                   c_abp: float) -> float:
    """|C(a,b) + C(a',b) + C(a',b') - C(a,b')|, classically bounded by 2."""
    for c in (c_ab, c_apb, c_apbp, c_abp):
        if not (-1.0 - NORM_TOL <= c <= 1.0 + NORM_TOL):
            raise ValueError(f"correlation {c} outside [-1, 1]")
    return abs(c_ab + c_apb + c_apbp - c_abp)
