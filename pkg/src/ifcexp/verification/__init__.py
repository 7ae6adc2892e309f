"""Brute-force and Monte Carlo cross-checks."""

from .lemmas import (Bounds, LemmaInstance, UnionInstance, constancy_lemma_instance,
                     constancy_union_instance, decaen_lower_bound, exact_union_probability,
                     lemma3_bounds, lemma4_bounds, monte_carlo_union, pairwise_independent_family,
                     random_lemma_instance, random_union_instance, truncated_union_bounds,
                     union_bounds, union_probability)
from .simulate import (EnumeratorStats, SimReport, composition, enumerator_threshold_check,
                       message_count, simulate_hk, simulate_ordinary, wilson_interval)

__all__ = [
    "Bounds", "LemmaInstance", "UnionInstance", "constancy_lemma_instance",
    "constancy_union_instance", "decaen_lower_bound", "exact_union_probability", "lemma3_bounds",
    "lemma4_bounds", "monte_carlo_union", "pairwise_independent_family", "random_lemma_instance",
    "random_union_instance", "truncated_union_bounds", "union_bounds", "union_probability",
    "EnumeratorStats", "SimReport", "composition", "enumerator_threshold_check", "message_count",
    "simulate_hk", "simulate_ordinary", "wilson_interval",
]
