"""Secret key agreement from space-bounded Kolmogorov complexity, at desk scale."""

__version__ = "0.1.0"

from .complexity import ComplexityResult, Oracle, SpaceSchedule, complexity, min_program  # noqa: E402
from .protocol import ProtocolResult, Transcript, run_protocol_A, run_protocol_B  # noqa: E402
from .vm import RunOutcome, VmLimits, run_program  # noqa: E402

__all__ = [
    "ComplexityResult", "Oracle", "SpaceSchedule", "complexity", "min_program",
    "ProtocolResult", "Transcript", "run_protocol_A", "run_protocol_B",
    "RunOutcome", "VmLimits", "run_program",
]
