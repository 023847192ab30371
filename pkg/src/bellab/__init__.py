"""Numerical laboratory for Bell-type inequalities with inefficient
detection: quantum predictions, local hidden-variable models, extreme-point
bound verification, and event-level Monte Carlo experiments."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    AnalyzerAngle,
    CountsTable,
    JointDistribution,
    PairCounts,
    ProbTriple,
    QmSource,
    SettingsQuad,
    chsh_statistic,
    correlation_from_counts,
    qm_full_distribution,
    qm_joint_probability,
    quad_from_phi,
)
