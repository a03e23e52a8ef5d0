"""Scoring arithmetic for explanation videos.

Five quality dimensions in [0, 1], a geometric-mean overall score, the
affine normalization of 1-5 human ratings onto [0, 1], rating aggregation,
and plain-text/CSV comparison reports against published baseline rows.

This module consumes scores and ratings; it never produces them (judging
pipelines are out of scope).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .errors import EmptyRatingSet, OutOfRange

DIMENSIONS = (
    "accuracy_depth",
    "visual_relevance",
    "logical_flow",
    "element_layout",
    "visual_consistency",
)

DIMENSION_LABELS = {
    "accuracy_depth": "Accuracy & Depth",
    "visual_relevance": "Visual Relevance",
    "logical_flow": "Logical Flow",
    "element_layout": "Element Layout",
    "visual_consistency": "Visual Consistency",
}


@dataclass(frozen=True)
class DimensionScores:
    """One score per quality dimension, each in [0, 1]."""

    accuracy_depth: float
    visual_relevance: float
    logical_flow: float
    element_layout: float
    visual_consistency: float

    def __post_init__(self):
        for name in DIMENSIONS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise OutOfRange(f"{name} must be a number, got {value!r}")
            if math.isnan(value) or not 0.0 <= value <= 1.0:
                raise OutOfRange(f"{name} must be in [0, 1], got {value!r}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return tuple(getattr(self, name) for name in DIMENSIONS)

    @classmethod
    def from_tuple(cls, values) -> "DimensionScores":
        if len(values) != len(DIMENSIONS):
            raise OutOfRange(f"expected {len(DIMENSIONS)} values, got {len(values)}")
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in DIMENSIONS}


def overall_score(dims: DimensionScores) -> float:
    """Geometric mean of the five dimensions; 0.0 if any dimension is 0.

    The factors are sorted before multiplying so the result is bit-identical
    under permutation of the dimensions.
    """
    values = sorted(dims.as_tuple())
    if values[0] == 0.0:
        return 0.0
    product = 1.0
    for v in values:
        product *= v
    return product ** (1.0 / len(values))


def arithmetic_overall(dims: DimensionScores) -> float:
    """Arithmetic mean of the five dimensions (reported alongside the
    canonical geometric mean; see comparison_report)."""
    values = dims.as_tuple()
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class EvaluationScore:
    """Dimension scores plus their aggregated overall score."""

    dims: DimensionScores
    overall: float

    def __post_init__(self):
        expected = overall_score(self.dims)
        if abs(self.overall - expected) > 1e-9:
            raise OutOfRange(
                f"overall {self.overall!r} does not recompute from dims "
                f"(expected {expected!r})"
            )

    @classmethod
    def from_dims(cls, dims: DimensionScores) -> "EvaluationScore":
        return cls(dims=dims, overall=overall_score(dims))

    def to_dict(self) -> dict:
        return {"dims": self.dims.to_dict(), "overall": self.overall}


RATING_MIN = 1
RATING_MAX = 5


def normalize_rating(rating: int) -> float:
    """Map a 1..5 rating onto [0, 1] via (r - 1) / 4."""
    if isinstance(rating, bool) or not isinstance(rating, int):
        raise OutOfRange(f"rating must be an integer, got {rating!r}")
    if not RATING_MIN <= rating <= RATING_MAX:
        raise OutOfRange(f"rating must be in {RATING_MIN}..{RATING_MAX}, got {rating}")
    return (rating - RATING_MIN) / (RATING_MAX - RATING_MIN)


@dataclass(frozen=True)
class HumanRating:
    """One rater's five raw 1..5 scores for a job."""

    job_ref: str
    dims_raw: tuple[int, int, int, int, int]

    def __post_init__(self):
        if len(self.dims_raw) != len(DIMENSIONS):
            raise OutOfRange(f"expected {len(DIMENSIONS)} ratings, got {len(self.dims_raw)}")
        for value in self.dims_raw:
            normalize_rating(value)  # range check

    def normalized(self) -> tuple[float, ...]:
        return tuple(normalize_rating(r) for r in self.dims_raw)


def aggregate_ratings(ratings: list[HumanRating]) -> EvaluationScore:
    """Per-dimension arithmetic mean of normalized ratings, overall via
    the geometric mean."""
    if not ratings:
        raise EmptyRatingSet("cannot aggregate an empty rating set")
    n = len(ratings)
    means = []
    for i in range(len(DIMENSIONS)):
        means.append(math.fsum(r.normalized()[i] for r in ratings) / n)
    return EvaluationScore.from_dims(DimensionScores.from_tuple(means))


@dataclass(frozen=True)
class ReportRow:
    """One comparison-report row: a label, its dimension scores, and
    optionally the overall score published for it elsewhere."""

    label: str
    dims: DimensionScores
    published_overall: float | None = None


# Baseline rows shipped for comparison reports (published dimension scores
# and overalls for the two strongest reference systems).
REFERENCE_BASELINES = (
    ReportRow(
        label="Claude 3.5-Sonnet",
        dims=DimensionScores(0.75, 0.87, 0.88, 0.57, 0.92),
        published_overall=0.79,
    ),
    ReportRow(
        label="o3-mini (medium)",
        dims=DimensionScores(0.76, 0.76, 0.89, 0.61, 0.88),
        published_overall=0.77,
    ),
)

_REPORT_COLUMNS = (
    ["label"]
    + list(DIMENSIONS)
    + ["overall_geometric", "overall_arithmetic", "published_overall", "delta_vs_published"]
)


def _report_cells(row: ReportRow) -> list[str]:
    geo = overall_score(row.dims)
    arith = arithmetic_overall(row.dims)
    cells = [row.label]
    cells += [f"{v:.3f}" for v in row.dims.as_tuple()]
    cells += [f"{geo:.4f}", f"{arith:.4f}"]
    if row.published_overall is None:
        cells += ["", ""]
    else:
        cells += [f"{row.published_overall:.3f}", f"{geo - row.published_overall:+.4f}"]
    return cells


def comparison_report(rows: list[ReportRow], fmt: str = "text") -> str:
    """Render comparison rows with recomputed overalls.

    Each row shows the canonical geometric-mean overall and the arithmetic
    mean as a labeled alternative; rows with a published overall also get
    the delta between recomputation and publication.

    fmt: "text" for an aligned table, "csv" for machine-readable output.
    """
    if fmt not in ("text", "csv"):
        raise ValueError(f"unknown report format: {fmt!r}")
    table = [_REPORT_COLUMNS] + [_report_cells(r) for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf).writerows(table)
        return buf.getvalue()
    widths = [max(len(r[i]) for r in table) for i in range(len(_REPORT_COLUMNS))]
    lines = []
    for irow, r in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip())
        if irow == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append("")
    lines.append("overall_geometric is the canonical aggregate; overall_arithmetic is")
    lines.append("shown as a labeled alternative. delta_vs_published compares the")
    lines.append("recomputed geometric mean against the published overall.")
    return "\n".join(lines) + "\n"
