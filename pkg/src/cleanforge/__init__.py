"""cleanforge: search-based synthesis of data-cleaning pipelines."""

from .quality import QualitySpec, evaluate
from .relation import Relation, Schema, load_csv, write_csv
from .repair_ir import ConditionalAssignment, Pipeline, apply_pipeline
from .search import SearchConfig, search

__version__ = "0.1.0"

__all__ = [
    "ConditionalAssignment",
    "Pipeline",
    "QualitySpec",
    "Relation",
    "Schema",
    "SearchConfig",
    "apply_pipeline",
    "evaluate",
    "load_csv",
    "search",
    "write_csv",
]
