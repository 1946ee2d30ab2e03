"""Amalgamated free products of finite groups and their rates of escape."""

from .groups import FiniteGroup, catalog, cyclic, direct_product, from_permutations, injective_homomorphisms
from .model import (AmalgamSpec, NormalWord, SubgroupEmbedding, cyclic_amalgam, element_lengths, format_word,
                    from_elements, identity_word, induced_mu, is_left_invariant, is_natural, parse_word,
                    random_amalgam, recurrence_check, validate_amalgam, word_inverse, word_length, word_multiply)
from .rates import (METHODS, L_table, amalgam_rates, applicable_methods, default_method, dgf_rate, dgf_terms,
                    exit_rate, green_table, lp_rate, lp_terms, rho, solve_amalgam_Gbar, solve_amalgam_H, xi_factor)
from .encode import encode_as_regular_language

__all__ = [
    "FiniteGroup", "catalog", "cyclic", "direct_product", "from_permutations",
    "injective_homomorphisms", "AmalgamSpec", "NormalWord", "SubgroupEmbedding", "cyclic_amalgam",
    "element_lengths", "format_word", "from_elements", "identity_word", "induced_mu",
    "is_left_invariant", "is_natural", "parse_word", "random_amalgam", "recurrence_check",
    "validate_amalgam", "word_inverse", "word_length", "word_multiply", "METHODS", "L_table",
    "amalgam_rates", "applicable_methods", "default_method", "dgf_rate", "dgf_terms", "exit_rate",
    "green_table", "lp_rate", "lp_terms", "rho", "solve_amalgam_Gbar", "solve_amalgam_H",
    "xi_factor", "encode_as_regular_language",
]
