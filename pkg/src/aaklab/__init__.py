"""AAK and best-L2 rational approximation of Cauchy transforms with polar terms."""
from .analysis import (angle, angle_bound_audit, attraction_audit, capacity_convergence_field,
                       rate_table, weak_star_distance)
from .hankel import aak_approximant, build_hankel, circle_error, singular_triples, split_blaschke
from .measure import MeasureSpec, cauchy_transform, markov_uniform, moments, three_interval_example
from .potential import equilibrium_measure, green_energy, green_potential, predicted_rate
from .rational import circle_target, multistart, optimize_denominator

__all__ = [
    "MeasureSpec", "aak_approximant", "angle", "angle_bound_audit", "attraction_audit",
    "build_hankel", "capacity_convergence_field", "cauchy_transform", "circle_error",
    "circle_target", "equilibrium_measure", "green_energy", "green_potential", "markov_uniform",
    "moments", "multistart", "optimize_denominator", "predicted_rate", "rate_table",
    "singular_triples", "split_blaschke", "three_interval_example", "weak_star_distance",
]
