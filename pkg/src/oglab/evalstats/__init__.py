"""Statistics and reporting: normalisation, Welch tests, robust aggregates and annotated tables."""

from importlib import resources

from .stats import (
    SIGNIFICANCE_LEVEL,
    NormalizationBounds,
    ProfileCurve,
    SummaryStat,
    WelchResult,
    betainc,
    bootstrap_ci,
    denormalize,
    iqm,
    normalize,
    normalize_by_reference,
    performance_profile,
    student_t_two_sided_p,
    welch_test,
)
from .tables import (
    AnnotatedRow,
    AnnotatedTable,
    Column,
    ResultTable,
    annotate_row,
    annotate_table,
    format_cell,
    ingest_result_table,
    matches_printed,
    parse_cell,
    read_references,
    render_table,
)

PUBLISHED_TABLES = ("smac_omiga", "mpe_omar", "mamujoco_omiga")


def published_table(name: str) -> ResultTable:
    """One of the bundled published result tables (see ``PUBLISHED_TABLES``)."""
    if name not in PUBLISHED_TABLES:
        from ..errors import ConfigurationError
        raise ConfigurationError(f"unknown published table {name!r}; known: {PUBLISHED_TABLES}")
    with resources.files("oglab.data").joinpath(f"{name}.csv").open("r", encoding="utf-8", newline="") as fh:
        return ingest_result_table(fh)


__all__ = [
    "AnnotatedRow", "AnnotatedTable", "Column", "NormalizationBounds", "PUBLISHED_TABLES", "ProfileCurve",
    "ResultTable", "SIGNIFICANCE_LEVEL", "SummaryStat", "WelchResult", "annotate_row", "annotate_table",
    "betainc", "bootstrap_ci", "denormalize", "format_cell", "ingest_result_table", "iqm", "matches_printed",
    "normalize", "normalize_by_reference", "parse_cell", "performance_profile", "published_table",
    "read_references", "render_table", "student_t_two_sided_p", "welch_test",
]
