from typing import Literal, Optional, Tuple, Union


ColumnKind = Literal["numerical", "categorical", "text", "primary_key", "foreign_key"]
TaskType = Literal["classification", "regression"]
LinkType = Literal["one_to_one", "one_to_many", "many_to_one"]
Modality = Literal["numerical", "categorical", "text"]
GroupingMethod = Literal[
    "maximal_clique",
    "girvan_newman",
    "random_pairs",
    "per_attribute",
    "projection",
    "unsplit",
]
SimilarityMode = Literal["threshold", "topk"]
Relation = Literal["join", "similarity"]
SplitName = Literal["train", "val", "test", "unlabeled"]
BaselineVariant = Literal["base_only", "all_join", "random_k"]
MiningArm = Literal["graph", "random_grouping", "none"]
NoMiningVariant = Literal["no_mining_whole_tuple", "no_mining_per_attribute"]
SamplingMode = Literal["full_graph", "neighbor"]

# number | category token | text | null
CellValue = Union[float, str, None]
Label = Union[int, float]
TupleRef = Tuple[str, str]
EdgeTypeKey = Tuple[str, Relation, str]
OptionalFloat = Optional[float]

MODALITY_OF_KIND = {
    "numerical": "numerical",
    "categorical": "categorical",
    "text": "text",
}
KEY_KINDS = ("primary_key", "foreign_key")
