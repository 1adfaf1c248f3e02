"""ShiftQL: parser, printer and the query tree."""

from shift.shiftql.ast import Query, to_json, walk
from shift.shiftql.parser import parse
from shift.shiftql.printer import to_text


def translate(tree, catalog, caches=None, **options):
    """Lower ``tree`` to a :class:`~shift.scheduler.TaskPlan` (see :meth:`Engine.translate`)."""
    from shift.engine import Engine

    engine = Engine(catalog, feature_cache=caches)
    return engine.translate(tree, **options)


def execute(tree, catalog, caches=None, **options):
    """Execute ``tree`` on a fresh engine (see :meth:`Engine.execute`)."""
    from shift.engine import Engine

    engine = Engine(catalog, feature_cache=caches)
    return engine.execute(tree, **options)


__all__ = ["Query", "execute", "parse", "to_json", "to_text", "translate", "walk"]
