"""CSV + JSON schema input/output and atomic artifact writes."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .datamodel import (
    AttributeDomain,
    RelationalDatabase,
    SensitivitySpec,
    compute_sensitivity,
    decode_database,
    encode_database,
)
from .errors import SchemaError


@dataclass(frozen=True)
class Schema:
    attributes: tuple
    primary_key: str
    label: str | None = None
    sensitivity: dict = field(default_factory=lambda: {"mode": "global"})

    def to_dict(self) -> dict:
        return {
            "attributes": [{"name": d.name, "values": list(d.values)} for d in self.attributes],
            "primary_key": self.primary_key,
            "label": self.label,
            "sensitivity": dict(self.sensitivity),
        }

    def sensitivity_for(self, db: RelationalDatabase, override: int | None = None) -> SensitivitySpec:
        """Resolve the declared sensitivity, with an optional caller override."""
        mode = self.sensitivity.get("mode", "global")
        value = override if override is not None else self.sensitivity.get("delta")
        return compute_sensitivity(db, mode, value)


def parse_schema(doc: dict) -> Schema:
    try:
        attrs = tuple(AttributeDomain(a["name"], tuple(a["values"])) for a in doc["attributes"])
        key = doc["primary_key"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"schema is missing a required field: {exc}") from None
    names = [a.name for a in attrs]
    if len(set(names)) != len(names):
        raise SchemaError("schema declares an attribute twice")
    label = doc.get("label")
    if key in names or (label is not None and label in names):
        raise SchemaError("key and label columns must not be attributes")
    sens = doc.get("sensitivity") or {"mode": "global"}
    return Schema(attrs, key, label, dict(sens))


def load_schema(path) -> Schema:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"schema file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file {path} is not valid JSON: {exc}") from None
    return parse_schema(doc)


def read_csv(path, schema: Schema) -> RelationalDatabase:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise SchemaError(f"data file not found: {path}") from None
    return encode_database(rows, schema.attributes, schema.primary_key, schema.label)


def csv_text(db: RelationalDatabase, schema: Schema) -> str:
    buf = io.StringIO()
    columns = [schema.primary_key] + db.attribute_names
    if db.label_column is not None:
        columns.append(db.label_column)
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(decode_database(db, schema.primary_key))
    return buf.getvalue()


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(db: RelationalDatabase, schema: Schema, path) -> None:
    atomic_write(path, csv_text(db, schema))


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> None:
    atomic_write(path, dumps_json(obj))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
