"""Generate JSON Schema and docs for the instance document format."""

from __future__ import annotations

import json
from pathlib import Path

from efmatch.config import InstanceDocument


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def _collect_refs(obj: object) -> set[str]:
    """Return all ``$defs`` names referenced via ``$ref`` inside *obj*."""
    refs: set[str] = set()
    if isinstance(obj, dict):
        ref = obj.get("$ref")
        if isinstance(ref, str) and ref.startswith("#/$defs/"):
            refs.add(ref.removeprefix("#/$defs/"))
        for v in obj.values():
            refs |= _collect_refs(v)
    elif isinstance(obj, list):
        for v in obj:
            refs |= _collect_refs(v)
    return refs


def _order_defs(defs: dict) -> dict:
    """Topologically sort ``$defs`` so referenced types precede referencing types."""
    ordered: dict[str, dict] = {}
    visited: set[str] = set()

    def _visit(name: str) -> None:
        if name in visited or name not in defs:
            return
        visited.add(name)
        for dep in sorted(_collect_refs(defs[name])):
            _visit(dep)
        ordered[name] = defs[name]

    for name in defs:
        _visit(name)
    return ordered


def generate_json_schema() -> dict:
    schema = InstanceDocument.model_json_schema()
    if "$defs" in schema:
        schema["$defs"] = _order_defs(schema["$defs"])
    return schema


def write_json_schema(path: Path) -> None:
    _ensure_parent(path)
    path.write_text(json.dumps(generate_json_schema(), indent=2) + "\n")


_QUOTA_MODELS = {
    "interval": "IntervalQuotaDoc",
    "explicit": "ExplicitQuotaDoc",
    "laminar": "LaminarQuotaDoc",
    "staffing": "StaffingQuotaDoc",
}


def _fields(model: dict) -> str:
    required = set(model.get("required", []))
    return ", ".join(
        f"{name}{'' if name in required else '?'}"
        for name in model.get("properties", {})
        if name != "type"
    )


def generate_schema_doc() -> str:
    defs = generate_json_schema().get("$defs", {})

    lines = [
        "# efmatch instance document",
        "",
        "This doc is generated from the Pydantic models.",
        "",
        "## Top-level keys",
        "- `doctors`: array of doctor identifiers, in processing order.",
        "- `hospitals`: array of hospital identifiers.",
        "- `edges`: array of `[doctor, hospital]` acceptable pairs.",
        "- `doctor_prefs`: doctor -> hospitals, best first; exactly the doctor's edges.",
        "- `hospital_prefs`: hospital -> doctors, best first; exactly the hospital's edges.",
        "- `quotas`: hospital -> quota object selected by `type`.",
        "",
        "## Quota types",
    ]
    for kind, model_name in _QUOTA_MODELS.items():
        lines.append(f"- `{kind}`: {{ {_fields(defs.get(model_name, {}))} }}")
    lines.append("")
    lines.append("Classes and constraints: { " + _fields(defs.get("ConstraintDoc", {})) + " }.")
    lines.append("Sections: { " + _fields(defs.get("SectionDoc", {})) + " }.")
    lines.append("")
    return "\n".join(lines)


def write_schema_doc(path: Path) -> None:
    _ensure_parent(path)
    path.write_text(generate_schema_doc())
