"""Persona registry.

Prompt texts live as data files next to this module, one per persona, with a
`personas.json` index carrying the model/temperature/reply-schema bindings.
Keeping prompts as files (not code constants) lets researchers iterate on the
guidelines without touching the pipeline.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator

logger = logging.getLogger(__name__)

PLACEHOLDER = "*PLACEHOLDER*"
PERSONA_ROLES = ("generator", "reviewer", "splitter")
REPLY_SCHEMAS = ("candidate_qa", "review_verdict", "sentence_list")


class TemplateError(Exception):
    """A prompt template violates the single-placeholder contract."""


class UnknownPersona(KeyError):
    """Requested persona id is not in the registry."""


@dataclass(frozen=True)
class PersonaSpec:
    persona_id: str
    name: str
    role: str
    template: str
    model_name: str
    temperature: float
    reply_schema: str
    message_role: str = "user"

    def __post_init__(self):
        if self.role not in PERSONA_ROLES:
            raise TemplateError(f"{self.persona_id}: unknown role {self.role!r}")
        if self.reply_schema not in REPLY_SCHEMAS:
            raise TemplateError(f"{self.persona_id}: unknown reply_schema {self.reply_schema!r}")
        if self.message_role not in ("user", "system"):
            raise TemplateError(f"{self.persona_id}: message_role must be 'user' or 'system'")
        count = self.template.count(PLACEHOLDER)
        if count != 1:
            raise TemplateError(
                f"{self.persona_id}: template must contain {PLACEHOLDER} exactly once, found {count}"
            )


@dataclass(frozen=True)
class PanelSpec:
    reviewers: tuple[PersonaSpec, ...]

    def __post_init__(self):
        if not self.reviewers:
            raise TemplateError("panel requires at least one reviewer")
        for spec in self.reviewers:
            if spec.role != "reviewer":
                raise TemplateError(f"{spec.persona_id} is not a reviewer")


class PersonaRegistry:
    """Immutable id -> PersonaSpec mapping; every template is validated on load."""

    def __init__(self, personas: dict[str, PersonaSpec]):
        self._personas = dict(personas)

    def get(self, persona_id: str) -> PersonaSpec:
        try:
            return self._personas[persona_id]
        except KeyError:
            raise UnknownPersona(persona_id) from None

    def ids(self) -> list[str]:
        return list(self._personas)

    def reviewers(self) -> list[PersonaSpec]:
        return [p for p in self._personas.values() if p.role == "reviewer"]

    def default_panel(self) -> PanelSpec:
        """The four reviewers in registry (file) order."""
        return PanelSpec(reviewers=tuple(self.reviewers()))

    def panel(self, persona_ids: list[str]) -> PanelSpec:
        return PanelSpec(reviewers=tuple(self.get(pid) for pid in persona_ids))

    def __len__(self) -> int:
        return len(self._personas)

    def __iter__(self) -> Iterator[PersonaSpec]:
        return iter(self._personas.values())

    def __contains__(self, persona_id: str) -> bool:
        return persona_id in self._personas


def load_registry(directory: Path) -> PersonaRegistry:
    """Load personas.json plus one `<id>.prompt.txt` per entry from `directory`."""
    index_path = Path(directory) / "personas.json"
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise TemplateError(f"persona index not found: {index_path}") from None
    except json.JSONDecodeError as exc:
        raise TemplateError(f"invalid persona index {index_path}: {exc}") from exc

    personas: dict[str, PersonaSpec] = {}
    for persona_id, binding in index.items():
        prompt_path = Path(directory) / f"{persona_id}.prompt.txt"
        if not prompt_path.exists():
            raise TemplateError(f"missing prompt file {prompt_path}")
        template = prompt_path.read_text(encoding="utf-8")
        personas[persona_id] = PersonaSpec(
            persona_id=persona_id,
            name=binding.get("name", persona_id),
            role=binding["role"],
            template=template,
            model_name=binding["model_name"],
            temperature=float(binding["temperature"]),
            reply_schema=binding["reply_schema"],
            message_role=binding.get("message_role", "user"),
        )
    logger.debug("loaded %d personas from %s", len(personas), directory)
    return PersonaRegistry(personas)


def builtin_personas() -> PersonaRegistry:
    """The shipped registry: generator, the four reviewers, and the splitter."""
    prompt_dir = resources.files("craqan") / "prompts"
    return load_registry(Path(str(prompt_dir)))


def render_prompt(persona: PersonaSpec, payload: str) -> str:
    """Substitute the template's single placeholder with `payload`."""
    if not payload:
        raise ValueError("payload must be non-empty")
    # single occurrence is a load-time invariant of PersonaSpec
    return persona.template.replace(PLACEHOLDER, payload)
