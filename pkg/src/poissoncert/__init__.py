"""Exact Poisson-binomial versus Poisson comparison and bound certificates."""

__version__ = "0.1.0"

from .errors import DomainError, InapplicableError, NumericalFailure
from .kernels import BACKEND
from .distributions import (
    BernoulliInstance, InstanceStats, Pmf, PoissonLaw, pb_pmf, pb_pmf_bruteforce, pb_stats,
    poisson_log_pmf, poisson_tail, poisson_interval, stirling_envelope, gaussian_envelope,
    poisson_tail_moment_bound, poisson_moment_facts, taylor_S,
)
from .divergences import (
    DivergenceReport, divergence_report, delta_sequence, total_variation, relative_entropy,
    chi_squared, kolmogorov_distance, sup_density_distance,
)
from .bounds import BoundCertificate, evaluate_certificate, verify_instance, hr_iid_interval
from .contour import ContourConfig, g_eval, phi_eval, pb_pmf_via_dft, bound_5_6, best_r_bound
from .harness import Regime, SweepTable, gen_instance, run_verification, sweep_iid_rate, \
    sweep_normal_comparison, emit_report

__all__ = [
    "BACKEND", "DomainError", "InapplicableError", "NumericalFailure",
    "BernoulliInstance", "InstanceStats", "Pmf", "PoissonLaw", "pb_pmf", "pb_pmf_bruteforce",
    "pb_stats", "poisson_log_pmf", "poisson_tail", "poisson_interval", "stirling_envelope",
    "gaussian_envelope", "poisson_tail_moment_bound", "poisson_moment_facts", "taylor_S",
    "DivergenceReport", "divergence_report", "delta_sequence", "total_variation",
    "relative_entropy", "chi_squared", "kolmogorov_distance", "sup_density_distance",
    "BoundCertificate", "evaluate_certificate", "verify_instance", "hr_iid_interval",
    "ContourConfig", "g_eval", "phi_eval", "pb_pmf_via_dft", "bound_5_6", "best_r_bound",
    "Regime", "SweepTable", "gen_instance", "run_verification", "sweep_iid_rate",
    "sweep_normal_comparison", "emit_report",
]
