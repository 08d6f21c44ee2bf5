"""citecheck: two-stage claim-citation verification.

Phase 1 verifies a claim against the cited paper's abstract and exits early
on a definitive verdict; claims the abstract cannot resolve escalate to
full-text retrieval and passage-level verification.
"""

__version__ = "0.1.0"

from .core import (
    ClaimInstance,
    ParsedCitation,
    StageResult,
    VerdictLabel,
    VerificationResult,
    parse_label,
)
from .pipeline import PipelineConfig, build_deps, verify_batch, verify_claim

__all__ = [
    "__version__",
    "ClaimInstance",
    "ParsedCitation",
    "StageResult",
    "VerdictLabel",
    "VerificationResult",
    "parse_label",
    "PipelineConfig",
    "build_deps",
    "verify_batch",
    "verify_claim",
]
