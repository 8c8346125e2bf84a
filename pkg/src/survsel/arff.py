"""Minimal ARFF reader.

Supports the subset used by ASlib scenario files: ``@relation``,
``@attribute <name> <numeric|real|integer|string|{enum}>``, and a ``@data``
section of comma-separated rows where ``?`` marks a missing value.  Sparse
rows, dates and weights are not supported.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FormatError


@dataclass(frozen=True)
class ArffFile:
    relation: str
    attributes: tuple[tuple[str, str], ...]  # (name, declared type)
    rows: list[list]

    def column(self, name: str) -> int:
        for i, (attr, _) in enumerate(self.attributes):
            if attr.lower() == name.lower():
                return i
        raise KeyError(name)


def _parse_attribute(rest: str, path, lineno: int) -> tuple[str, str]:
    rest = rest.strip()
    if rest.startswith(("'", '"')):
        quote = rest[0]
        end = rest.find(quote, 1)
        if end < 0:
            raise FormatError(f"{path}:{lineno}: unterminated attribute name")
        name, typ = rest[1:end], rest[end + 1 :].strip()
    else:
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: malformed @attribute line")
        name, typ = parts
    if not typ:
        raise FormatError(f"{path}:{lineno}: attribute {name!r} has no type")
    return name, typ.strip()


def _convert(token: str, typ: str):
    token = token.strip()
    if token == "?" or token == "":
        return None
    if token.startswith(("'", '"')) and token.endswith(token[0]) and len(token) >= 2:
        token = token[1:-1]
    if typ.lower() in ("numeric", "real", "integer"):
        return float(token)
    return token


def read_arff(path) -> ArffFile:
    """Parse ``path``; raises :class:`FormatError` on malformed input."""
    relation = ""
    attributes: list[tuple[str, str]] = []
    rows: list[list] = []
    in_data = False
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        lowered = line.lower()
        if not in_data:
            if lowered.startswith("@relation"):
                relation = line[len("@relation") :].strip().strip("'\"")
            elif lowered.startswith("@attribute"):
                attributes.append(_parse_attribute(line[len("@attribute") :], path, lineno))
            elif lowered.startswith("@data"):
                in_data = True
            else:
                raise FormatError(f"{path}:{lineno}: unexpected line before @data: {line[:60]!r}")
            continue
        tokens = line.split(",")
        if len(tokens) != len(attributes):
            raise FormatError(
                f"{path}:{lineno}: row has {len(tokens)} values, expected {len(attributes)}"
            )
        try:
            rows.append([_convert(tok, attributes[i][1]) for i, tok in enumerate(tokens)])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not in_data:
        raise FormatError(f"{path}: no @data section")
    return ArffFile(relation, tuple(attributes), rows)
