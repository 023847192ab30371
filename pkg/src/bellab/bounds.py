"""Bound machinery for the detection-efficiency-independent inequalities.

Two linear functions of single-photon probabilities drive everything here:

* ``g``: a six-argument combination whose hidden-variable average G obeys
  -1 <= G <= 0 for any local model with direction-independent losses. The
  bound follows from enumerating the sixteen extreme assignments of the
  single-photon probabilities (each slot either 0 or its detection-mass
  cap), with the parallel-polarization coupling of same-direction slots.

* ``f``: a five-argument, three-setting analogue obeying the same [-1, 0]
  bound.

The quantum predictions violate the upper bound of both for suitable
geometries, with a sign that does not depend on the detection efficiency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from scipy.optimize import minimize_scalar

from .core import (AnalyzerAngle, JointDistribution, ProbTriple, QmSource,
                   SettingsQuad, qm_full_distribution, quad_from_phi)

__all__ = [
    "SinglesProfile",
    "ExtremeRow",
    "GReport",
    "ScanPoint",
    "ScanResult",
    "QUAD_PAIR_LABELS",
    "THREE_SETTING_PAIR_LABELS",
    "g_from_components",
    "g_function",
    "f_function",
    "enumerate_extremes",
    "averaged_rows_under_assumption_a",
    "g_statistic",
    "f_statistic",
    "qm_g_closed_form",
    "qm_f_closed_form",
    "qm_distributions_for_quad",
    "qm_distributions_for_three_settings",
    "three_setting_angles",
    "scan_violation",
]

#: setting-pair labels used by the six-term statistic, in a fixed order
QUAD_PAIR_LABELS = ("ab", "abp", "apb", "apbp", "apap", "bb")

#: setting-pair labels used by the three-setting statistic
THREE_SETTING_PAIR_LABELS = ("ab", "apb", "apa", "apap")


@dataclass(frozen=True)
class SinglesProfile:
    """The six single-photon probability triples entering g at one lambda.

    Wing 1 along a, a', b and wing 2 along b, b', a'.
    """

    p1_a: ProbTriple
    p1_ap: ProbTriple
    p1_b: ProbTriple
    p2_b: ProbTriple
    p2_bp: ProbTriple
    p2_ap: ProbTriple


def g_from_components(p1a: float, p2b: float, p1ap: float, p2bp: float,
                      p2ap: float, p1b: float) -> float:
    """g evaluated on the six scalar probabilities (in slot order
    p1(a), p2(b), p1(a'), p2(b'), p2(a'), p1(b))."""
    return (p1a * (p2b - p2bp)
            + p1ap * (p2b + p2bp)
            - p1ap * p2ap
            - p1b * p2b)


def g_function(profile: SinglesProfile, r: int, q: int) -> float:
    """g for outcome pair (r, q), picking components from the profile."""
    return g_from_components(
        profile.p1_a.prob(r), profile.p2_b.prob(q), profile.p1_ap.prob(r),
        profile.p2_bp.prob(q), profile.p2_ap.prob(r), profile.p1_b.prob(q))


def f_function(p1_a: float, p1_ap: float, p2_b: float, p2_a: float,
               p2_ap: float) -> float:
    """Three-setting analogue of g on five scalar probabilities."""
    return -p1_a * p2_b + p1_ap * (p2_b + p2_a - p2_ap)


# Extreme assignments: which of the six slots (in g_from_components order)
# sits at its detection-mass cap. Same-direction slots are coupled: slot 3
# (wing 1 along a') with slot 5 (wing 2 along a'), and slot 2 (wing 2 along
# b) with slot 6 (wing 1 along b) -- parallel polarizations forbid one wing
# passing for sure while its mate surely does not.
_SLOT_SYMBOLS = ("alpha1", "beta2", "alpha1p", "beta2p", "alpha2p", "beta1")

_ROW_OCCUPANCY = (
    (0, 0, 0, 0, 0, 0),
    (1, 0, 0, 0, 0, 0),
    (0, 1, 0, 0, 0, 1),
    (0, 0, 1, 0, 1, 0),
    (0, 0, 0, 1, 0, 0),
    (0, 0, 1, 1, 1, 0),
    (0, 1, 0, 1, 0, 1),
    (1, 0, 0, 1, 0, 0),
    (0, 1, 1, 0, 1, 1),
    (1, 0, 1, 0, 1, 0),
    (1, 1, 0, 0, 0, 1),
    (0, 1, 1, 1, 1, 1),
    (1, 0, 1, 1, 1, 0),
    (1, 1, 0, 1, 0, 1),
    (1, 1, 1, 0, 1, 1),
    (1, 1, 1, 1, 1, 1),
)

# Closed-form limit of g per row, as a function of the six caps
# (a1, b2, a1p, b2p, a2p, b1).
_ROW_LIMITS: Sequence[Callable[..., float]] = (
    lambda a1, b2, a1p, b2p, a2p, b1: 0.0,
    lambda a1, b2, a1p, b2p, a2p, b1: 0.0,
    lambda a1, b2, a1p, b2p, a2p, b1: -b2 * b1,
    lambda a1, b2, a1p, b2p, a2p, b1: -a1p * a2p,
    lambda a1, b2, a1p, b2p, a2p, b1: 0.0,
    lambda a1, b2, a1p, b2p, a2p, b1: a1p * (b2p - a2p),
    lambda a1, b2, a1p, b2p, a2p, b1: -b2 * b1,
    lambda a1, b2, a1p, b2p, a2p, b1: -a1 * b2p,
    lambda a1, b2, a1p, b2p, a2p, b1: a1p * (b2 - a2p) - b2 * b1,
    lambda a1, b2, a1p, b2p, a2p, b1: -a1p * a2p,
    lambda a1, b2, a1p, b2p, a2p, b1: (a1 - b1) * b2,
    lambda a1, b2, a1p, b2p, a2p, b1: a1p * (b2p - a2p) + (a1p - b1) * b2,
    lambda a1, b2, a1p, b2p, a2p, b1: (-a1 + a1p) * b2p - a1p * a2p,
    lambda a1, b2, a1p, b2p, a2p, b1: a1 * (b2 - b2p) - b2 * b1,
    lambda a1, b2, a1p, b2p, a2p, b1: (a1 - b1) * b2 + a1p * (b2 - a2p),
    lambda a1, b2, a1p, b2p, a2p, b1: ((a1 - b1) * b2 + (a1p - a1) * b2p
                                       + a1p * (b2 - a2p)),
)


@dataclass(frozen=True)
class ExtremeRow:
    """One extreme assignment of the six probability slots, with g evaluated
    both directly and via the tabulated closed form."""

    row_index: int
    occupancy: tuple
    assignment: tuple
    symbols: tuple
    g_numeric: float
    g_symbolic: float


def enumerate_extremes(ineff) -> list:
    """Evaluate g on all sixteen extreme assignments for the given caps.

    ``ineff`` is the six detection masses (alpha1, beta2, alpha1', beta2',
    alpha2', beta1), each in [0, 1]. For every row the direct evaluation of
    g and the tabulated closed form must agree; both are returned so tests
    can assert the match.
    """
    caps = tuple(float(x) for x in ineff)
    if len(caps) != 6:
        raise ValueError("need exactly six inefficiency caps")
    for x in caps:
        if not (0.0 <= x <= 1.0):
            raise ValueError(f"inefficiency cap {x} outside [0, 1]")
    rows = []
    for i, (occ, limit) in enumerate(zip(_ROW_OCCUPANCY, _ROW_LIMITS), start=1):
        assignment = tuple(c if o else 0.0 for o, c in zip(occ, caps))
        symbols = tuple(s if o else "0" for o, s in zip(occ, _SLOT_SYMBOLS))
        rows.append(ExtremeRow(
            row_index=i,
            occupancy=occ,
            assignment=assignment,
            symbols=symbols,
            g_numeric=g_from_components(*assignment),
            g_symbolic=limit(*caps),
        ))
    return rows


def _detected_mass(dists: Mapping[str, JointDistribution], key: str) -> float:
    try:
        d = dists[key]
    except KeyError:
        raise KeyError(f"missing setting pair {key!r}") from None
    return d.detected_mass()


# Which detected-mass differences realize the average of each potentially
# positive extreme row; every term vanishes when non-detection marginals
# are direction-independent.
_ROW_AVERAGES = {
    6: (("apbp", 1), ("apap", -1)),
    11: (("ab", 1), ("bb", -1)),
    12: (("apbp", 1), ("apap", -1), ("apb", 1), ("bb", -1)),
    15: (("ab", 1), ("bb", -1), ("apb", 1), ("apap", -1)),
    16: (("ab", 1), ("bb", -1), ("apbp", 1), ("abp", -1),
         ("apb", 1), ("apap", -1)),
}


def averaged_rows_under_assumption_a(dists: Mapping[str, JointDistribution],
                                     rows=(6, 11, 12, 15, 16)) -> dict:
    """Experimental averages of the positive-capable extreme rows.

    Each value is a signed sum of detected masses of setting pairs; with
    direction-independent non-detection marginals every one of them is
    exactly zero, which is what pins the upper bound of G at 0.
    """
    out = {}
    for row in rows:
        try:
            terms = _ROW_AVERAGES[row]
        except KeyError:
            raise ValueError(f"row {row} has no direction-dependence average "
                             f"(rows: {sorted(_ROW_AVERAGES)})") from None
        out[row] = sum(sign * _detected_mass(dists, key)
                       for key, sign in terms)
    return out


@dataclass(frozen=True)
class GReport:
    """Value of a probability-combination statistic with its [-1, 0] check."""

    value: float
    components: dict = field(compare=False)
    bound_violated: bool
    stderr: float | None = None


def g_statistic(dists: Mapping[str, JointDistribution], r: int, q: int,
                tol: float = 0.0) -> GReport:
    """Six-term statistic G from joint distributions for the pairs
    ab, abp, apb, apbp, apap, bb (keys of ``dists``)."""
    comps = {
        "P_rq(a,b)": _get(dists, "ab").prob(r, q),
        "P_rq(a,b')": _get(dists, "abp").prob(r, q),
        "P_rq(a',b)": _get(dists, "apb").prob(r, q),
        "P_rq(a',b')": _get(dists, "apbp").prob(r, q),
        "P_rr(a',a')": _get(dists, "apap").prob(r, r),
        "P_qq(b,b)": _get(dists, "bb").prob(q, q),
    }
    value = (comps["P_rq(a,b)"] - comps["P_rq(a,b')"] + comps["P_rq(a',b)"]
             + comps["P_rq(a',b')"] - comps["P_rr(a',a')"] - comps["P_qq(b,b)"])
    return GReport(value=value, components=comps,
                   bound_violated=value > tol or value < -1.0 - tol)


def f_statistic(dists: Mapping[str, JointDistribution], r: int, q: int,
                tol: float = 0.0) -> GReport:
    """Three-setting statistic from joint distributions for the pairs
    ab, apb, apa, apap (keys of ``dists``)."""
    comps = {
        "P_rq(a,b)": _get(dists, "ab").prob(r, q),
        "P_rq(a',b)": _get(dists, "apb").prob(r, q),
        "P_rr(a',a)": _get(dists, "apa").prob(r, r),
        "P_rr(a',a')": _get(dists, "apap").prob(r, r),
    }
    value = (-comps["P_rq(a,b)"] + comps["P_rq(a',b)"]
             + comps["P_rr(a',a)"] - comps["P_rr(a',a')"])
    return GReport(value=value, components=comps,
                   bound_violated=value > tol or value < -1.0 - tol)


def _get(dists: Mapping[str, JointDistribution], key: str) -> JointDistribution:
    try:
        return dists[key]
    except KeyError:
        raise KeyError(f"missing setting pair {key!r}") from None


def qm_distributions_for_quad(src: QmSource, quad: SettingsQuad) -> dict:
    """The six joint distributions the G statistic needs, QM-predicted."""
    a, b, ap, bp = quad.a, quad.b, quad.a_prime, quad.b_prime
    return {
        "ab": qm_full_distribution(src, a, b),
        "abp": qm_full_distribution(src, a, bp),
        "apb": qm_full_distribution(src, ap, b),
        "apbp": qm_full_distribution(src, ap, bp),
        "apap": qm_full_distribution(src, ap, ap),
        "bb": qm_full_distribution(src, b, b),
    }


def three_setting_angles(theta: float):
    """Collinear settings realizing |a'-b| = |a-a'| = theta/2, |a-b| = theta.

    Returns (a, b, a_prime) = (theta, 0, theta/2).
    """
    if not (0.0 <= theta <= math.pi / 2.0):
        raise ValueError(f"theta={theta} outside [0, pi/2]")
    return AnalyzerAngle(theta), AnalyzerAngle(0.0), AnalyzerAngle(theta / 2.0)


def qm_distributions_for_three_settings(src: QmSource, theta: float) -> dict:
    """The four joint distributions the three-setting statistic needs."""
    a, b, ap = three_setting_angles(theta)
    return {
        "ab": qm_full_distribution(src, a, b),
        "apb": qm_full_distribution(src, ap, b),
        "apa": qm_full_distribution(src, ap, a),
        "apap": qm_full_distribution(src, ap, ap),
    }


def qm_g_closed_form(src: QmSource, phi: float, r: int = 1, q: int = 1) -> float:
    """Closed form of G on the phi-parameterized quad:
    (eta F s / 4) [r q (3 cos phi - cos 3 phi) - 2]."""
    s = src.correlation_sign
    return 0.25 * src.eta_overall * src.F * s * (
        r * q * (3.0 * math.cos(phi) - math.cos(3.0 * phi)) - 2.0)


def qm_f_closed_form(src: QmSource, theta: float, r: int = 1, q: int = 1) -> float:
    """Closed form of the three-setting statistic on the collinear settings:
    (eta F s / 4) [r q (cos theta - cos 2 theta) + cos theta - 1]."""
    s = src.correlation_sign
    return 0.25 * src.eta_overall * src.F * s * (
        r * q * (math.cos(theta) - math.cos(2.0 * theta))
        + math.cos(theta) - 1.0)


@dataclass(frozen=True)
class ScanPoint:
    phi: float
    g: float
    violated: bool


@dataclass(frozen=True)
class ScanResult:
    points: tuple
    #: (lo, hi) intervals of phi where G > 0, endpoints bisected to 1e-10
    violation_intervals: tuple
    phi_max: float
    g_max: float


_PHI_HI = 2.0 * math.pi / 3.0
_BISECT_TOL = 1e-10


def scan_violation(src: QmSource, phi_grid: int = 256,
                   r: int = 1, q: int = 1) -> ScanResult:
    """Scan G over phi in (0, 2 pi / 3] and isolate where the bound fails.

    Grid values come from the full joint-distribution path; interval
    endpoints and the maximizer are refined on the analytic closed form by
    bisection / bounded minimization, since the boundary is an analytic
    object.
    """
    if phi_grid < 64:
        raise ValueError("phi grid must have at least 64 points")
    points = []
    for i in range(1, phi_grid + 1):
        phi = _PHI_HI * i / phi_grid
        rep = g_statistic(qm_distributions_for_quad(src, quad_from_phi(phi)),
                          r, q)
        points.append(ScanPoint(phi=phi, g=rep.value, violated=rep.value > 0.0))

    def h(phi: float) -> float:
        return qm_g_closed_form(src, phi, r, q)

    # Sign structure of G > 0 along a dense analytic grid, then bisect.
    dense_n = max(phi_grid, 1024)
    dense = [(_PHI_HI * i / dense_n) for i in range(dense_n + 1)]
    flags = [h(phi) > 0.0 for phi in dense]
    intervals = []
    start = None
    for (p0, f0), (p1, f1) in zip(zip(dense, flags), zip(dense[1:], flags[1:])):
        if f1 and not f0:
            start = p0 if h(p0) == 0.0 else _bisect_boundary(h, p0, p1)
        if f0 and not f1:
            end = _bisect_boundary(h, p0, p1)
            intervals.append((0.0 if start is None else start, end))
            start = None
    if start is not None:
        intervals.append((start, _PHI_HI))

    res = minimize_scalar(lambda p: -h(p), bounds=(0.0, _PHI_HI),
                          method="bounded",
                          options={"xatol": _BISECT_TOL})
    phi_max = float(res.x)
    return ScanResult(points=tuple(points),
                      violation_intervals=tuple(intervals),
                      phi_max=phi_max, g_max=h(phi_max))


def _bisect_boundary(h: Callable[[float], float], lo: float, hi: float) -> float:
    """Bisection for the boundary of {h > 0} between lo and hi."""
    f_lo = h(lo) > 0.0
    for _ in range(200):
        if hi - lo <= _BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if (h(mid) > 0.0) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
