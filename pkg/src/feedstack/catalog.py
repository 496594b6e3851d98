"""Loading and validating principle catalogs.

A catalog is a JSON document: ``{"version": ..., "principles": [...]}`` where
each principle has ``id``, ``name``, ``definition``, and a non-empty ``terms``
list. The package ships a default five-principle catalog covering the classic
visual-design vocabulary; callers can swap in their own file.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Union

from .model import (
    CatalogValidationError,
    PrincipleCatalog,
    catalog_from_wire,
    validate_catalog,
)

DEFAULT_CATALOG_RESOURCE = "default_catalog.json"


def parse_catalog(data: dict[str, Any]) -> PrincipleCatalog:
    """Build and validate a catalog from already-parsed JSON."""
    try:
        catalog = catalog_from_wire(data)
    except (KeyError, TypeError) as exc:
        raise CatalogValidationError(f"malformed catalog document: {exc}") from exc
    validate_catalog(catalog)
    # Cross-principle term conflicts are a validation failure too, not just a
    # lexicon-construction failure; surface them at load time.
    claimed: dict[str, str] = {}
    for p in catalog.principles:
        for term in p.terms:
            key = term.casefold()
            owner = claimed.get(key)
            if owner is not None and owner != p.id:
                raise CatalogValidationError(
                    f"term {term!r} claimed by both {owner!r} and {p.id!r}"
                )
            claimed[key] = p.id
    return catalog


def load_catalog(path: Union[str, Path]) -> PrincipleCatalog:
    """Load a catalog from a JSON file."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CatalogValidationError(f"catalog is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CatalogValidationError("catalog document must be a JSON object")
    return parse_catalog(data)


def default_catalog() -> PrincipleCatalog:
    """The built-in catalog of five visual-design principles."""
    raw = resources.files("feedstack.data").joinpath(DEFAULT_CATALOG_RESOURCE).read_text(
        encoding="utf-8"
    )
    return parse_catalog(json.loads(raw))
