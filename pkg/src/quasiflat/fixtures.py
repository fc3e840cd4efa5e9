"""Bundled JSON fixtures and loaders that accept either a path or a fixture name.

Groups are ``{"degree": N, "generators": [[images...], ...]}`` (a bare list of
generators is accepted too), squares are integer grids with 0 for ``*`` and
families are ``{"variant": ..., params...}``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .latin import SparseLatinSquare
from .models import ModelFamily, family_from_json
from .perm import Permutation, PermutationGroup, generate_group

__all__ = ["load_json", "load_group", "load_square", "load_family", "group_from_json",
           "fixture_names"]


def fixture_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__package__).joinpath("data").iterdir()
                  if p.name.endswith(".json"))


def load_json(ref: str, prefix: str = ""):
    """Read JSON from a file path, or from the bundled fixture ``prefix + ref``."""
    path = Path(ref)
    if path.exists():
        return json.loads(path.read_text())
    data = resources.files(__package__).joinpath("data")
    res = data.joinpath(f"{prefix}{ref}.json")
    if not res.is_file():
        res = data.joinpath(f"{ref}.json")
    if not res.is_file():
        raise FileNotFoundError(f"no file or bundled fixture named {ref!r}")
    return json.loads(res.read_text())


def group_from_json(data) -> PermutationGroup:
    gens = data["generators"] if isinstance(data, dict) else data
    return generate_group([Permutation(tuple(g)) for g in gens])


def load_group(ref: str) -> PermutationGroup:
    return group_from_json(load_json(ref, "group_"))


def load_square(ref: str, k=None) -> SparseLatinSquare:
    data = load_json(ref, "square_")
    if isinstance(data, dict):
        return SparseLatinSquare.from_grid(data["grid"], data.get("K", k))
    return SparseLatinSquare.from_grid(data, k)


def load_family(ref: str) -> ModelFamily:
    """Family from inline JSON text, a file path, or a bundled fixture name."""
    text = ref.strip()
    if text.startswith("{"):
        return family_from_json(json.loads(text))
    return family_from_json(load_json(ref, "family_"))
