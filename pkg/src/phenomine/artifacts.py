"""Versioned on-disk artifacts with input digests.

Every delimited file the pipeline writes starts with a comment header:

    # <NAME> v1 key=value key=value ...

Headers carry sha256 digests (first 16 hex chars) of the inputs the
artifact was computed from, so a later stage can refuse to run against
stale output instead of silently mixing generations.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Dict, List, Sequence, Tuple

from .errors import DigestMismatch, MissingArtifact, SchemaError

VERSION = "v1"


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(65536), b""):
                h.update(chunk)
    except FileNotFoundError:
        raise MissingArtifact(f"missing input file: {path}") from None
    return h.hexdigest()[:16]


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def header_line(name: str, fields: Dict[str, str]) -> str:
    for key, value in fields.items():
        if " " in key or "=" in key or " " in str(value):
            raise SchemaError(f"header field {key!r}={value!r} must not contain spaces")
    parts = [f"# {name} {VERSION}"]
    parts.extend(f"{k}={v}" for k, v in fields.items())
    return " ".join(parts)


def write_artifact(path: str, name: str, fields: Dict[str, str],
                   lines: Sequence[str]) -> None:
    body = "\n".join([header_line(name, fields), *lines]) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(body)


def parse_header(line: str, expected_name: str, path: str) -> Dict[str, str]:
    prefix = f"# {expected_name} {VERSION}"
    if line != prefix and not line.startswith(prefix + " "):
        raise SchemaError(
            f"{path}: expected a '{expected_name}' header, found {line[:60]!r}"
        )
    fields: Dict[str, str] = {}
    rest = line[len(prefix):].strip()
    if rest:
        for part in rest.split(" "):
            if "=" not in part:
                raise SchemaError(f"{path}: malformed header field {part!r}")
            k, v = part.split("=", 1)
            fields[k] = v
    return fields


def read_artifact(path: str, expected_name: str) -> Tuple[Dict[str, str], List[str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except FileNotFoundError:
        raise MissingArtifact(
            f"missing artifact {path}; run the producing stage first"
        ) from None
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError(f"{path}: empty artifact")
    fields = parse_header(lines[0], expected_name, path)
    return fields, lines[1:]


def require_fresh(fields: Dict[str, str], inputs: Dict[str, str], path: str) -> None:
    """Check recorded input digests against the files on disk now."""
    for key, input_path in inputs.items():
        recorded = fields.get(key)
        if recorded is None:
            raise SchemaError(f"{path}: header lacks input digest {key!r}")
        current = file_digest(input_path)
        if recorded != current:
            raise DigestMismatch(
                f"{path} was built from a different {key} "
                f"(recorded {recorded}, file is {current}); rerun the producing stage"
            )


def write_json_artifact(path: str, name: str, payload: dict) -> None:
    """JSON artifact; the version tag is the first key of the object."""
    body = {"artifact": f"{name} {VERSION}"}
    body.update(payload)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(body, fh, indent=2)
        fh.write("\n")


def read_json_artifact(path: str, expected_name: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            body = json.load(fh)
    except FileNotFoundError:
        raise MissingArtifact(
            f"missing artifact {path}; run the producing stage first"
        ) from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from None
    tag = body.get("artifact")
    if tag != f"{expected_name} {VERSION}":
        raise SchemaError(f"{path}: expected '{expected_name} {VERSION}', found {tag!r}")
    return body


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def escape_field(text: str) -> str:
    """Make free text safe for one TSV cell."""
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_field(cell: str) -> str:
    out = []
    i = 0
    while i < len(cell):
        ch = cell[i]
        if ch == "\\" and i + 1 < len(cell):
            nxt = cell[i + 1]
            if nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            elif nxt == "\\":
                out.append("\\")
            else:
                out.append(nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)
