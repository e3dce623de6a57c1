"""Reading and writing ranking datasets.

Two formats are accepted:

* CSV-like text: a header line ``m=<int>,n=<int>`` followed by ``n`` lines,
  each holding the comma-separated positions of candidates ``1..m``.
* JSON: an array of arrays of positions.

Both parsers reject non-permutation rows with the offending line number.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .errors import InvalidInputError
from .rankings import Ranking, RankingDataset

_HEADER = re.compile(r"^\s*m\s*=\s*(\d+)\s*,\s*n\s*=\s*(\d+)\s*$")


def _check_row(row: list[int], m: int, line: int) -> None:
    if len(row) != m:
        raise InvalidInputError(f"line {line}: expected {m} positions, got {len(row)}")
    if sorted(row) != list(range(1, m + 1)):
        raise InvalidInputError(f"line {line}: not a permutation of 1..{m}")


def parse_text(text: str) -> RankingDataset:
    lines = text.splitlines()
    # skip leading blank lines, but keep real line numbers for messages
    idx = 0
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx == len(lines):
        raise InvalidInputError("empty dataset file")
    header = _HEADER.match(lines[idx])
    if not header:
        raise InvalidInputError(f"line {idx + 1}: expected header 'm=<int>,n=<int>'")
    m, n = int(header.group(1)), int(header.group(2))
    rows: list[list[int]] = []
    for lineno in range(idx + 2, len(lines) + 1):
        raw = lines[lineno - 1].strip()
        if not raw:
            continue
        try:
            row = [int(tok) for tok in raw.split(",")]
        except ValueError:
            raise InvalidInputError(f"line {lineno}: non-integer entry") from None
        _check_row(row, m, lineno)
        rows.append(row)
    if len(rows) != n:
        raise InvalidInputError(f"header declares n={n} but found {len(rows)} rankings")
    if n < 1:
        raise InvalidInputError("dataset must contain at least one ranking")
    return RankingDataset(rows, validate=False)


def parse_json(text: str) -> RankingDataset:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, list) or not data:
        raise InvalidInputError("JSON dataset must be a non-empty array of arrays")
    m = len(data[0]) if isinstance(data[0], list) else -1
    rows = []
    for i, row in enumerate(data, start=1):
        if not isinstance(row, list) or not all(isinstance(v, int) for v in row):
            raise InvalidInputError(f"line {i}: ranking must be an array of integers")
        _check_row(row, m, i)
        rows.append(row)
    return RankingDataset(rows, validate=False)


def parse_dataset(text: str) -> RankingDataset:
    """Parse either format, detected from the first non-blank character."""
    if text.lstrip().startswith("["):
        return parse_json(text)
    return parse_text(text)


def read_dataset(path: str | Path) -> RankingDataset:
    path = Path(path)
    return parse_dataset(path.read_text())


def format_text(data: RankingDataset) -> str:
    lines = [f"m={data.m},n={data.n}"]
    lines.extend(",".join(map(str, row)) for row in data.positions.tolist())
    return "\n".join(lines) + "\n"


def write_dataset(data: RankingDataset, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(data.positions.tolist()) + "\n")
    else:
        path.write_text(format_text(data))


def parse_ranking(text: str) -> Ranking:
    """One comma-separated position vector, as written by ``aggregate``."""
    try:
        return Ranking(tuple(int(tok) for tok in text.strip().split(",")))
    except ValueError:
        raise InvalidInputError(f"cannot parse ranking {text.strip()!r}") from None
