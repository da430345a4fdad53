"""Toy model of diffusion along a chain of tori."""

from .coverings import (ChartHSets, DiffusionReport, INEQUALITY_NAMES, Inequality, ItineraryRow,
                        SIZE_FIELDS, ToyCoveringParams, build_chart_hsets, certificates, chain_spec,
                        covering_params, diffuse, flow_map, inequalities, jump_map,
                        linear_flow_matrix, verify_flow_covering, verify_jump_covering)
from .dynamics import (ChartLayout, ChartState, ToyConfig, ToyModelError, flow, g1, g2, jump,
                       jump_inverse, jump_matrix, layout, lipschitz_g, mass, rhs)
from .estimates import (admissible_T, center_bounds, center_constant, enclosure_stage,
                        enclosure_stages, hyperbolic_enclosure, theorem_constraints, transit_time,
                        violated_constraints)

__all__ = [
    "ChartHSets", "DiffusionReport", "INEQUALITY_NAMES", "Inequality", "ItineraryRow", "SIZE_FIELDS",
    "ToyCoveringParams", "build_chart_hsets", "certificates", "chain_spec", "covering_params",
    "diffuse", "flow_map", "inequalities", "jump_map", "linear_flow_matrix",
    "verify_flow_covering", "verify_jump_covering", "ChartLayout", "ChartState", "ToyConfig",
    "ToyModelError", "flow", "g1", "g2", "jump", "jump_inverse", "jump_matrix", "layout",
    "lipschitz_g", "mass", "rhs", "admissible_T", "center_bounds", "center_constant",
    "enclosure_stage", "enclosure_stages", "hyperbolic_enclosure", "theorem_constraints",
    "transit_time", "violated_constraints",
]
