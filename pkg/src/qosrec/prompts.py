"""Descriptive sentences for users and services, and the prompt manifest.

One fixed template per entity kind; attribute text is interpolated verbatim
(placeholders like "null" included). Numeric attributes (IP address, IP
number, latitude, longitude) never appear in a sentence.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .data import ServiceRecord, UserRecord
from .errors import IntegrityError, ParseError

USER_TEMPLATE = "web user, located in {country}, in autonomous system {autonomous_system}."

SERVICE_TEMPLATE = (
    "web service, at url {wsdl_address}, hosted by {provider}, "
    "located in {country}, in autonomous system {autonomous_system}."
)

TEMPLATE_HASH = hashlib.sha256(
    (USER_TEMPLATE + "\n" + SERVICE_TEMPLATE).encode("utf-8")
).hexdigest()

_MANIFEST_TAG = "#qpm1"


@dataclass(frozen=True)
class PromptText:
    entity_kind: str
    entity_id: int
    text: str


def build_user_sentence(user: UserRecord) -> PromptText:
    text = USER_TEMPLATE.format(
        country=user.country, autonomous_system=user.autonomous_system
    )
    return PromptText(entity_kind="user", entity_id=user.user_id, text=text)


def build_service_sentence(service: ServiceRecord) -> PromptText:
    text = SERVICE_TEMPLATE.format(
        wsdl_address=service.wsdl_address,
        provider=service.provider,
        country=service.country,
        autonomous_system=service.autonomous_system,
    )
    return PromptText(entity_kind="service", entity_id=service.service_id, text=text)


def build_prompts(
    users: list[UserRecord], services: list[ServiceRecord]
) -> list[PromptText]:
    prompts = [build_user_sentence(u) for u in users]
    prompts.extend(build_service_sentence(s) for s in services)
    return prompts


def write_prompt_manifest(prompts: list[PromptText], path: str | Path) -> None:
    """Write ``kind<TAB>id<TAB>sentence`` lines under a template-hash header."""
    path = Path(path)
    lines = [f"{_MANIFEST_TAG}\t{TEMPLATE_HASH}\n"]
    for p in prompts:
        if "\t" in p.text or "\n" in p.text:
            raise IntegrityError(
                f"prompt for {p.entity_kind} {p.entity_id} contains a tab or newline"
            )
        lines.append(f"{p.entity_kind}\t{p.entity_id}\t{p.text}\n")
    path.write_text("".join(lines), encoding="utf-8")


def read_prompt_manifest(path: str | Path) -> tuple[str, list[PromptText]]:
    """Load a manifest; returns (template_hash, prompts)."""
    path = Path(path)
    prompts: list[PromptText] = []
    template_hash = ""
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if lineno == 1:
                fields = line.split("\t")
                if len(fields) != 2 or fields[0] != _MANIFEST_TAG:
                    raise ParseError(f"{path}:1: missing {_MANIFEST_TAG} header")
                template_hash = fields[1]
                continue
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 columns")
            kind, raw_id, text = fields
            if kind not in ("user", "service"):
                raise ParseError(f"{path}:{lineno}: unknown entity kind {kind!r}")
            try:
                entity_id = int(raw_id)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer ID {raw_id!r}") from None
            prompts.append(PromptText(entity_kind=kind, entity_id=entity_id, text=text))
    return template_hash, prompts
