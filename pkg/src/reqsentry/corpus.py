"""Record-framed request files and the append-only retrain store.

``.reqs`` files hold raw HTTP request texts separated by a line consisting
exactly of ``---END---`` (trailing separator optional).  ``.lreqs`` files use
the same framing with a first record line ``LABEL:<ClassName>`` naming the
attack class.  The retrain store is a JSON-lines file of canonical request
texts judged normal; records are only ever appended.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Iterator

from .classifier import AttackClass

RECORD_SEPARATOR = "---END---"
LABEL_PREFIX = "LABEL:"


def iter_records(stream: IO[str]) -> Iterator[str]:
    """Yield record texts from a separator-framed stream.

    The newline that terminates the last record line belongs to the framing
    and is stripped, so written records round-trip byte-exactly.
    """
    pending: list[str] = []
    for line in stream:
        if line.rstrip("\r\n") == RECORD_SEPARATOR:
            record = "".join(pending)
            yield record[:-1] if record.endswith("\n") else record
            pending = []
        else:
            pending.append(line)
    if pending:
        record = "".join(pending)
        yield record[:-1] if record.endswith("\n") else record


def write_records(stream: IO[str], records: list[str]) -> None:
    for record in records:
        stream.write(record)
        stream.write("\n")
        stream.write(RECORD_SEPARATOR)
        stream.write("\n")


def read_reqs(path: str | Path) -> list[str]:
    # newline="" keeps CRLF sequences inside records intact
    with open(path, encoding="utf-8", newline="") as fh:
        return list(iter_records(fh))


def write_reqs(path: str | Path, records: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_records(fh, records)


def read_lreqs(path: str | Path) -> list[tuple[AttackClass, str]]:
    """Labeled records: first line names the class, the rest is the request."""
    out: list[tuple[AttackClass, str]] = []
    for record in read_reqs(path):
        label_line, sep, raw = record.partition("\n")
        if not label_line.startswith(LABEL_PREFIX) or not sep:
            raise ValueError(f"labeled record missing {LABEL_PREFIX}<ClassName> line")
        name = label_line[len(LABEL_PREFIX):].strip()
        try:
            label = AttackClass[name]
        except KeyError:
            raise ValueError(f"unknown attack class name {name!r}") from None
        out.append((label, raw))
    return out


def write_lreqs(path: str | Path, records: list[tuple[AttackClass, str]]) -> None:
    framed = [f"{LABEL_PREFIX}{label.name}\n{raw}" for label, raw in records]
    write_reqs(path, framed)


class RetrainStore:
    """Append-only file of canonical requests the detector judged normal."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, canonical: str) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"canonical": canonical}) + "\n")

    def count(self) -> int:
        if not self.path.exists():
            return 0
        with open(self.path, encoding="utf-8") as fh:
            return sum(1 for line in fh if line.strip())

    def load(self) -> list[str]:
        if not self.path.exists():
            return []
        out: list[str] = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    out.append(json.loads(line)["canonical"])
        return out
