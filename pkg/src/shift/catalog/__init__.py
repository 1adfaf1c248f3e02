from shift.catalog.records import BenchmarkResult, ModelRecord, ReaderRecord
from shift.catalog.sqleval import Evaluator, Relation, sql_eval
from shift.catalog.store import Catalog, CatalogView, holdout

__all__ = [
    "BenchmarkResult",
    "Catalog",
    "CatalogView",
    "Evaluator",
    "ModelRecord",
    "ReaderRecord",
    "Relation",
    "holdout",
    "sql_eval",
]
