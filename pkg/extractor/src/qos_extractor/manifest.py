"""Prompt manifest reader.

The manifest is a UTF-8 TSV: a ``#qpm1<TAB><template-hash>`` header line,
then one ``kind<TAB>id<TAB>sentence`` line per entity. Sentences contain no
tabs by construction; both entity kinds may appear in one file.
"""

from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

MANIFEST_TAG = "#qpm1"
ENTITY_KINDS = ("user", "service")


@dataclass(frozen=True)
class Prompt:
    entity_kind: str
    entity_id: int
    text: str


def read_prompt_manifest(path: str | Path) -> tuple[str, list[Prompt]]:
    """Parse a manifest, returning (template_hash, prompts in file order)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError(f"{path}: empty manifest")
    header = lines[0].split("\t")
    if len(header) != 2 or header[0] != MANIFEST_TAG:
        raise ManifestError(f"{path}:1: missing {MANIFEST_TAG} header")
    template_hash = header[1]
    prompts: list[Prompt] = []
    seen: set[tuple[str, int]] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ManifestError(f"{path}:{lineno}: expected 3 tab-separated fields")
        kind, raw_id, text = fields
        if kind not in ENTITY_KINDS:
            raise ManifestError(f"{path}:{lineno}: unknown entity kind {kind!r}")
        try:
            entity_id = int(raw_id)
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: bad entity id {raw_id!r}") from None
        if entity_id < 0:
            raise ManifestError(f"{path}:{lineno}: negative entity id {entity_id}")
        if (kind, entity_id) in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate {kind} id {entity_id}")
        seen.add((kind, entity_id))
        prompts.append(Prompt(entity_kind=kind, entity_id=entity_id, text=text))
    return template_hash, prompts


def select_kind(prompts: list[Prompt], kind: str) -> list[Prompt]:
    if kind not in ENTITY_KINDS:
        raise ManifestError(f"unknown entity kind {kind!r}")
    return [p for p in prompts if p.entity_kind == kind]
