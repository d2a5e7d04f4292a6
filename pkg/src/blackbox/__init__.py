"""Query-only teacher APIs, query ledgers and teacher training."""

from src.blackbox.api import BlackBoxApi, QueryApi, WhiteBoxTeacher
from src.blackbox.ledger import (
    CL_PHASE,
    EVAL_PHASE,
    GENERATOR_PHASE,
    MEMORY_PHASE,
    BudgetExhausted,
    QueryLedger,
    export_ledgers,
)
from src.blackbox.remote import RemoteBlackBoxApi
from src.blackbox.teacher_training import (
    TeacherHyperParams,
    TrainingDivergence,
    train_teacher,
    train_teacher_model,
)

__all__ = [
    "CL_PHASE",
    "EVAL_PHASE",
    "GENERATOR_PHASE",
    "MEMORY_PHASE",
    "BlackBoxApi",
    "BudgetExhausted",
    "QueryApi",
    "QueryLedger",
    "RemoteBlackBoxApi",
    "TeacherHyperParams",
    "TrainingDivergence",
    "WhiteBoxTeacher",
    "export_ledgers",
    "train_teacher",
    "train_teacher_model",
]
