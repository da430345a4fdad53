"""Covering relations, back-coverings and chains of coverings."""

from .chain import (ChainError, ChainSolution, ChainSolveError, ChainSpec, Drop,
                    ShadowingReport, endpoint_nonsingularity, endpoint_system,
                    solve_chain, verify_shadowing)
from .maps import EvaluationError, MapHandle, unit_form
from .relations import (EXACT, SAMPLED, CoveringCertificate, CoveringError,
                        check_backcovering, check_covering, check_covering_affine,
                        check_covering_sampled)
from .textio import ChainFileError, certificate_block, parse_chain, parse_chain_file

__all__ = [
    "ChainError", "ChainSolution", "ChainSolveError", "ChainSpec", "Drop", "ShadowingReport",
    "endpoint_nonsingularity", "endpoint_system", "solve_chain", "verify_shadowing",
    "EvaluationError", "MapHandle", "unit_form", "EXACT", "SAMPLED", "CoveringCertificate",
    "CoveringError", "check_backcovering", "check_covering", "check_covering_affine",
    "check_covering_sampled", "ChainFileError", "certificate_block", "parse_chain",
    "parse_chain_file",
]
