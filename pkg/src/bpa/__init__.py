"""Two-type branching processes with attack and acquisition."""

from .core import (
    BPA,
    BPNA,
    ChainState,
    CsvSink,
    MemorySink,
    ModelParams,
    ReplicationOutcome,
    StopRule,
    max_min,
    run,
    run_python,
    step,
)
from .distributions import (
    AttackSpec,
    Binomial,
    BinomialOfFriends,
    Constant,
    ExplicitPMF,
    Poisson,
    PoissonThinned,
    Zero,
)

__version__ = "0.1.0"

__all__ = [
    "BPA",
    "BPNA",
    "AttackSpec",
    "Binomial",
    "BinomialOfFriends",
    "ChainState",
    "Constant",
    "CsvSink",
    "ExplicitPMF",
    "MemorySink",
    "ModelParams",
    "Poisson",
    "PoissonThinned",
    "ReplicationOutcome",
    "StopRule",
    "Zero",
    "max_min",
    "run",
    "run_python",
    "step",
]
