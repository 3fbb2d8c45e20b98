"""Mean reaction times of metastable Markov processes.

Exact kernel linear algebra (stationary, entrance and quasi-stationary
distributions, occupation identities, bias bounds), certified QSD
computation through projective-metric contraction, elliptic diffusion
simulation with QSD loop sampling, and adaptive multilevel splitting.
"""

from . import birkhoff, diffusion, kernel, measures, splitting, toys
from .errors import ReactimeError
from .kernel import (
    BiasReport,
    PartitionedKernel,
    QsdRecord,
    bias_report,
    entrance_distribution,
    entrance_kernel,
    ergodicity_scan,
    hill_identity,
    hq_relaxation,
    killed_conditional_law,
    mean_hitting_time,
    poisson_solve,
    principal_qsd,
    qsd_spectrum,
    reconstruct_pi0,
    return_stationary,
    stationary_distribution,
    validate_kernel,
)
from .measures import DiscreteMeasure, condition_measure, tv_norm

__version__ = "0.1.0"

__all__ = [
    "BiasReport",
    "DiscreteMeasure",
    "PartitionedKernel",
    "QsdRecord",
    "ReactimeError",
    "bias_report",
    "birkhoff",
    "condition_measure",
    "diffusion",
    "entrance_distribution",
    "entrance_kernel",
    "ergodicity_scan",
    "hill_identity",
    "hq_relaxation",
    "kernel",
    "killed_conditional_law",
    "mean_hitting_time",
    "measures",
    "poisson_solve",
    "principal_qsd",
    "qsd_spectrum",
    "reconstruct_pi0",
    "return_stationary",
    "splitting",
    "stationary_distribution",
    "toys",
    "tv_norm",
    "validate_kernel",
]
