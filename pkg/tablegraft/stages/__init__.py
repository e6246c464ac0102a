from tablegraft.stages.augment import AugmentStages
from tablegraft.stages.experiments import ExperimentStages
from tablegraft.stages.mining import MiningStages
from tablegraft.stages.relational import RelationalStages


__all__ = (
    "RelationalStages",
    "MiningStages",
    "AugmentStages",
    "ExperimentStages",
)
