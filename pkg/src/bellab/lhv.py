"""Local hidden-variable models and the perfect-correlation contradiction
checker.

A model assigns, for each wing and analyzer direction, an outcome
probability triple as a function of a hidden variable lambda, together with
a sampling density for lambda. Bell locality is structural: the two wings'
triples are combined only as products at fixed lambda.

The built-in models all use a single hidden polarization angle distributed
uniformly on [0, pi):

* ``det_sign``              deterministic sign-of-cosine outcomes
* ``malus_stochastic``      Malus-law outcome probabilities
* ``det_sign_lossy(eta)``   det_sign with constant detection mass eta
* ``malus_lossy(eta)``      Malus with constant detection mass eta
* ``direction_biased_loss(base, amplitude)``
                            Malus with detection mass base + amplitude*cos 2u,
                            deliberately violating direction-independence of
                            the losses (for testing the tester)
"""

from __future__ import annotations

import abc
import math
import re
from dataclasses import dataclass

import numpy as np

from .core import AnalyzerAngle, ProbTriple

__all__ = [
    "LhvModel",
    "DetSignModel",
    "MalusModel",
    "DirectionBiasedLossModel",
    "BtccReport",
    "BUILTIN_MODELS",
    "builtin_model",
    "epsilon",
    "joint_epsilon",
    "correlation",
    "correlation_grid",
    "analytic_distribution",
    "btcc_check",
    "VERDICT_ACHIEVED",
    "VERDICT_FAILED_STOCHASTIC",
    "VERDICT_INCONCLUSIVE",
]

_CHUNK = 1 << 16


def _chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream, chunk).

    Philox keys are 128-bit; packing the three indices into disjoint bit
    ranges makes every chunk's stream independent and worker-count
    invariant.
    """
    key = ((int(seed) & (2**64 - 1)) << 64) | ((int(stream) & 0xFFFFFFFF) << 32) \
        | (int(chunk) & 0xFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


class LhvModel(abc.ABC):
    """Interface: per-photon outcome probabilities given a hidden variable."""

    name: str = "lhv"
    #: True only if every returned triple has components in {0, 1}
    deterministic: bool = False
    #: dimension of the hidden-variable vector
    dim: int = 1

    @abc.abstractmethod
    def prob_arrays(self, wing: int, direction: AnalyzerAngle, lam: np.ndarray):
        """Vectorized (p_plus, p_minus, p_zero) over an array of lambdas."""

    @abc.abstractmethod
    def sample_hidden(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n hidden variables from the model's declared density."""

    def hidden_grid(self, nodes: int) -> np.ndarray:
        """Equal-weight quadrature nodes for the hidden-variable density.

        Built-ins use lambda ~ Uniform[0, pi); midpoint nodes integrate any
        trigonometric polynomial in 2*lambda exactly.
        """
        if self.dim != 1:
            raise NotImplementedError("grid integration needs a 1-d lambda")
        return (np.arange(nodes) + 0.5) * (math.pi / nodes)

    def prob_triple(self, wing: int, direction: AnalyzerAngle,
                    lam: float) -> ProbTriple:
        pp, pm, pz = self.prob_arrays(wing, direction, np.atleast_1d(
            np.asarray(lam, dtype=float)))
        return ProbTriple(float(pp[0]), float(pm[0]), float(pz[0]))


class _UniformAngleModel(LhvModel):
    """Base for built-ins whose lambda is a polarization angle ~ U[0, pi)."""

    def sample_hidden(self, rng, n):
        return rng.uniform(0.0, math.pi, n)


class DetSignModel(_UniformAngleModel):
    """Deterministic outcomes: pass iff cos 2(u - lambda) >= 0.

    With eta < 1 a constant fraction of the outcome mass is moved to
    non-detection (direction-independent loss).
    """

    def __init__(self, eta: float = 1.0) -> None:
        if not (0.0 < eta <= 1.0):
            raise ValueError(f"eta={eta} outside (0, 1]")
        self.eta = float(eta)
        self.deterministic = eta == 1.0
        self.name = "det_sign" if eta == 1.0 else f"det_sign_lossy({eta:g})"

    def prob_arrays(self, wing, direction, lam):
        passes = np.cos(2.0 * (direction.value - lam)) >= 0.0
        pp = np.where(passes, self.eta, 0.0)
        pm = np.where(passes, 0.0, self.eta)
        pz = np.full_like(pp, 1.0 - self.eta)
        return pp, pm, pz


class MalusModel(_UniformAngleModel):
    """Stochastic Malus-law outcomes: p_plus = eta * cos^2(u - lambda)."""

    deterministic = False

    def __init__(self, eta: float = 1.0) -> None:
        if not (0.0 < eta <= 1.0):
            raise ValueError(f"eta={eta} outside (0, 1]")
        self.eta = float(eta)
        self.name = "malus_stochastic" if eta == 1.0 else f"malus_lossy({eta:g})"

    def prob_arrays(self, wing, direction, lam):
        c2 = np.cos(direction.value - lam) ** 2
        pp = self.eta * c2
        pm = self.eta * (1.0 - c2)
        pz = np.full_like(pp, 1.0 - self.eta)
        return pp, pm, pz


class DirectionBiasedLossModel(_UniformAngleModel):
    """Malus outcomes with detection mass eta(u) = base + amplitude*cos 2u.

    Violates direction-independence of the non-detection probabilities on
    purpose; useful to confirm that the homogeneity tester has power.
    """

    deterministic = False

    def __init__(self, base: float = 0.8, amplitude: float = 0.1) -> None:
        if not (0.0 <= base - abs(amplitude) and base + abs(amplitude) <= 1.0):
            raise ValueError("detection mass base +- amplitude must stay in [0, 1]")
        self.base = float(base)
        self.amplitude = float(amplitude)
        self.name = f"direction_biased_loss({base:g},{amplitude:g})"

    def detection_mass(self, direction: AnalyzerAngle) -> float:
        return self.base + self.amplitude * math.cos(2.0 * direction.value)

    def prob_arrays(self, wing, direction, lam):
        eta_u = self.detection_mass(direction)
        c2 = np.cos(direction.value - lam) ** 2
        pp = eta_u * c2
        pm = eta_u * (1.0 - c2)
        pz = np.full_like(pp, 1.0 - eta_u)
        return pp, pm, pz


BUILTIN_MODELS = (
    "det_sign",
    "malus_stochastic",
    "det_sign_lossy(eta)",
    "malus_lossy(eta)",
    "direction_biased_loss(base,amplitude)",
)

_NAME_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$")


def builtin_model(name: str) -> LhvModel:
    """Construct a built-in model from a name plus optional parameter list,
    e.g. ``malus_lossy(0.8)`` or ``direction_biased_loss(0.8,0.1)``."""
    m = _NAME_RE.match(name)
    if not m:
        raise ValueError(f"cannot parse model name {name!r}; "
                         f"built-ins: {', '.join(BUILTIN_MODELS)}")
    base, argstr = m.group(1), m.group(2)
    args = [float(x) for x in argstr.split(",")] if argstr else []
    try:
        if base == "det_sign":
            return DetSignModel(*args) if args else DetSignModel()
        if base == "malus_stochastic":
            return MalusModel(*args) if args else MalusModel()
        if base == "det_sign_lossy":
            return DetSignModel(*(args or [0.8]))
        if base == "malus_lossy":
            return MalusModel(*(args or [0.8]))
        if base == "direction_biased_loss":
            return DirectionBiasedLossModel(*args)
    except TypeError as exc:
        raise ValueError(f"bad parameters for model {base!r}: {exc}") from exc
    raise ValueError(f"unknown model {base!r}; "
                     f"built-ins: {', '.join(BUILTIN_MODELS)}")


def epsilon(model: LhvModel, wing: int, u: AnalyzerAngle, lam) -> float:
    """Per-lambda average outcome p_plus - p_minus; always in [-1, 1]."""
    return model.prob_triple(wing, u, lam).expectation()


def _epsilon_array(model: LhvModel, wing: int, u: AnalyzerAngle,
                   lam: np.ndarray) -> np.ndarray:
    pp, pm, _ = model.prob_arrays(wing, u, lam)
    return pp - pm


def joint_epsilon(model: LhvModel, a: AnalyzerAngle, b: AnalyzerAngle,
                  lam) -> float:
    """Product of the two wings' per-lambda averages (locality hard-coded)."""
    return epsilon(model, 1, a, lam) * epsilon(model, 2, b, lam)


def correlation(model: LhvModel, a: AnalyzerAngle, b: AnalyzerAngle,
                n_samples: int, seed: int = 0):
    """Monte Carlo estimate of C(a, b) = E_lambda[eps1 * eps2].

    Returns (estimate, stderr). Sampling is chunked with counter-derived
    per-chunk seeds, so the estimate does not depend on how chunks are
    scheduled across workers.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk_idx = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        rng = _chunk_rng(seed, 1, chunk_idx)
        lam = model.sample_hidden(rng, m)
        prod = _epsilon_array(model, 1, a, lam) * _epsilon_array(model, 2, b, lam)
        total += float(prod.sum())
        total_sq += float((prod * prod).sum())
        done += m
        chunk_idx += 1
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / n_samples)


def correlation_grid(model: LhvModel, a: AnalyzerAngle, b: AnalyzerAngle,
                     nodes: int = 2048) -> float:
    """High-precision C(a, b) by equal-weight quadrature over lambda.

    Exact (to rounding) for the smooth built-ins, whose integrands are low
    order trigonometric polynomials.
    """
    lam = model.hidden_grid(nodes)
    prod = _epsilon_array(model, 1, a, lam) * _epsilon_array(model, 2, b, lam)
    return float(prod.mean())


def analytic_distribution(model: LhvModel, a: AnalyzerAngle, b: AnalyzerAngle,
                          nodes: int = 2048):
    """Quadrature-evaluated 3x3 joint outcome distribution of an LHV model.

    Serves as the independent oracle that event-level simulation must
    converge to.
    """
    from .core import JointDistribution

    lam = model.hidden_grid(nodes)
    w1 = model.prob_arrays(1, a, lam)
    w2 = model.prob_arrays(2, b, lam)
    t = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            t[i, j] = float((w1[i] * w2[j]).mean())
    return JointDistribution(t)


VERDICT_ACHIEVED = "PerfectCorrelationAchieved"
VERDICT_FAILED_STOCHASTIC = "PerfectCorrelationFailed_Stochastic"
VERDICT_INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class BtccReport:
    """Result of the same-direction perfect-correlation check.

    nondeterministic_mass is the sampled probability mass of hidden
    variables at which either wing's per-lambda average has modulus below
    1 - tol, i.e. genuinely stochastic behavior.
    """

    direction: AnalyzerAngle
    c_same: float
    c_same_stderr: float
    nondeterministic_mass: float
    verdict: str
    tol: float
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "direction_rad": self.direction.value,
            "c_same": self.c_same,
            "c_same_stderr": self.c_same_stderr,
            "nondeterministic_mass": self.nondeterministic_mass,
            "verdict": self.verdict,
            "tol": self.tol,
            "n_samples": self.n_samples,
        }


def btcc_check(model: LhvModel, a: AnalyzerAngle, n_samples: int = 100_000,
               tol: float = 1e-3, seed: int = 0) -> BtccReport:
    """Test whether a model achieves perfect same-direction correlation.

    Estimates C(a, a) and the hidden-variable mass on which the model is
    non-deterministic. A stochastic model (non-negligible mass) cannot
    reach |C(a, a)| = 1: perfect correlation forces per-lambda averages of
    modulus 1 almost everywhere.
    """
    if not (0.0 < tol <= 0.1):
        raise ValueError("tol must be in (0, 0.1]")
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 10^4")
    total = 0.0
    total_sq = 0.0
    nondet = 0
    done = 0
    chunk_idx = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        rng = _chunk_rng(seed, 2, chunk_idx)
        lam = model.sample_hidden(rng, m)
        e1 = _epsilon_array(model, 1, a, lam)
        e2 = _epsilon_array(model, 2, a, lam)
        prod = e1 * e2
        total += float(prod.sum())
        total_sq += float((prod * prod).sum())
        nondet += int(np.count_nonzero(
            (np.abs(e1) < 1.0 - tol) | (np.abs(e2) < 1.0 - tol)))
        done += m
        chunk_idx += 1
    c_same = total / n_samples
    var = max(total_sq / n_samples - c_same * c_same, 0.0)
    stderr = math.sqrt(var / n_samples)
    mass = nondet / n_samples

    gap = 1.0 - abs(c_same)
    threshold = max(3.0 * stderr, tol)
    if gap <= threshold and mass <= tol:
        verdict = VERDICT_ACHIEVED
    elif gap > threshold and mass > tol:
        verdict = VERDICT_FAILED_STOCHASTIC
    else:
        verdict = VERDICT_INCONCLUSIVE
    return BtccReport(direction=a, c_same=c_same, c_same_stderr=stderr,
                      nondeterministic_mass=mass, verdict=verdict,
                      tol=tol, n_samples=n_samples)
