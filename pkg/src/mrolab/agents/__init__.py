from .cql import CqlPolicy, QConfig, QModel, TrainingDiverged, cql_action, cql_loss, greedy_index, train_cql
from .dt import DTConfig, DTModel, DTPolicy, dt_loss, dt_rollout, one_hot_actions, train_dt

__all__ = [
    "CqlPolicy",
    "QConfig",
    "QModel",
    "TrainingDiverged",
    "cql_action",
    "cql_loss",
    "greedy_index",
    "train_cql",
    "DTConfig",
    "DTModel",
    "DTPolicy",
    "dt_loss",
    "dt_rollout",
    "one_hot_actions",
    "train_dt",
]
