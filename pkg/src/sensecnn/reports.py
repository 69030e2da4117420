"""Jinja2 rendering of the plain-text results table and feature-detector reports."""

from functools import lru_cache
from typing import Any, Dict, List, Mapping

from jinja2 import Environment, PackageLoader, StrictUndefined, select_autoescape
from jinja2.exceptions import TemplateError

from .exceptions import SenseCnnError

RESULTS_TEMPLATE = "results.txt.j2"
DETECTORS_TEXT_TEMPLATE = "feature_detectors.txt.j2"
DETECTORS_HTML_TEMPLATE = "feature_detectors.html.j2"


def _format_percentage(value: float, decimals: int = 2) -> str:
    """
    Accuracy as a percentage.

    Example:
        {{ 0.665 | percentage }} -> "66.50"
    """
    try:
        return f"{float(value) * 100:.{decimals}f}"
    except (ValueError, TypeError):
        return str(value)


def _format_fixed(value: float, decimals: int = 4) -> str:
    try:
        return f"{float(value):.{decimals}f}"
    except (ValueError, TypeError):
        return str(value)


@lru_cache(maxsize=1)
def environment() -> Environment:
    """Shared environment over the package's ``templates`` directory."""
    env = Environment(
        loader=PackageLoader("sensecnn", "templates"),
        autoescape=select_autoescape(enabled_extensions=('html.j2',), default_for_string=False),
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
        undefined=StrictUndefined,
    )
    env.filters['percentage'] = _format_percentage
    env.filters['fixed'] = _format_fixed
    return env


def render(template_name: str, **context: Any) -> str:
    """
    Render a packaged template.

    Raises:
        SenseCnnError: If the template is missing or fails to render
    """
    try:
        return environment().get_template(template_name).render(**context)
    except TemplateError as e:
        raise SenseCnnError(
            f"could not render report template '{template_name}'",
            {"reason": str(e)},
        ) from e


def render_results_text(results: Mapping[str, Any]) -> str:
    """Plain-text table of a results document (see ``harness``)."""
    baselines: List[str] = list(results.get("baselines", []))
    flagged = {
        (entry["verb"], entry["pair"][1])
        for entry in results.get("significance", [])
        if entry["midp"] < results.get("alpha", 0.05)
    }

    def cell(accuracy, significant=False) -> str:
        text = _format_percentage(accuracy) if accuracy is not None else "-"
        return f"{text + ('*' if significant else ''):>12}"

    rows = []
    for verb, entry in results.get("per_verb", {}).items():
        rows.append({
            "verb": verb,
            "n": entry["n"],
            "accuracy": entry["accuracy"],
            "cells": [
                cell(entry.get("baselines", {}).get(kind, {}).get("accuracy"), (verb, kind) in flagged)
                for kind in baselines
            ],
        })
    baselines_micro = results.get("baselines_micro", {})
    return render(
        RESULTS_TEMPLATE,
        title=results.get("title", "results"),
        model=results.get("model", "model"),
        header_cells=[f"{kind:>12}" for kind in baselines],
        rows=rows,
        micro=results.get("micro"),
        micro_cells=[cell(baselines_micro.get(kind)) for kind in baselines],
        significance=results.get("significance", []),
        notes=results.get("notes", []),
        alpha=results.get("alpha", 0.05),
    )


def _detector_sections(hits_by_filter, stats) -> List[Dict[str, Any]]:
    sections = []
    for filter_id in sorted(hits_by_filter):
        hits = hits_by_filter[filter_id]
        name = f"{filter_id[0]}-{filter_id[1]}"
        summary = stats.per_filter.get(name) if stats is not None else None
        sections.append({
            "name": name,
            "region_size": filter_id[0],
            "hits": hits,
            "summary": summary,
        })
    return sections


def render_detectors_text(hits_by_filter, stats=None) -> str:
    """Each filter's ranked hits with the detected n-gram bracketed in its sentence."""
    return render(DETECTORS_TEXT_TEMPLATE, sections=_detector_sections(hits_by_filter, stats), stats=stats)


def render_detectors_html(hits_by_filter, stats=None) -> str:
    return render(DETECTORS_HTML_TEMPLATE, sections=_detector_sections(hits_by_filter, stats), stats=stats)
