from .audit import AuditEntry, AuditReport, AuditSummary, effectivity_audit
from .basis import BasisBuilder, ReducedBasis, Selection
from .greedy import greedy_build
from .online import OnlineResult, error_bound, online_solve
from .storage import basis_fingerprint, load_basis, save_basis

__all__ = [
    "AuditEntry",
    "AuditReport",
    "AuditSummary",
    "BasisBuilder",
    "OnlineResult",
    "ReducedBasis",
    "Selection",
    "basis_fingerprint",
    "effectivity_audit",
    "error_bound",
    "greedy_build",
    "load_basis",
    "online_solve",
    "save_basis",
]
