"""Shared domain types: orientations, the character description, validation."""

from animech.core.character import (
    CharacterDescription,
    FootGeometry,
    JointSpec,
    LinkSpec,
    default_character,
    from_json_dict,
    load_character,
    save_character,
    to_json_dict,
    validate_character,
)
from animech.core import rotations

__all__ = [
    "CharacterDescription",
    "FootGeometry",
    "JointSpec",
    "LinkSpec",
    "default_character",
    "from_json_dict",
    "load_character",
    "save_character",
    "to_json_dict",
    "validate_character",
    "rotations",
]
