"""Stream-parse compressed PubMed/MEDLINE bulk XML into PubRecord values.

Parsing is incremental: one citation element is materialized at a time and
cleared as soon as its record is emitted, so memory stays bounded by the
largest single citation rather than the archive size. Citations without a
usable PMID are skipped and counted, never silently dropped.
"""

from __future__ import annotations

import enum
import gzip
import re
import xml.etree.ElementTree as ET
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Optional, Union


class ArchiveStreamError(RuntimeError):
    """Decompression failed; carries the compressed-stream byte offset."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at compressed byte offset {byte_offset})")
        self.byte_offset = byte_offset


class ArchiveParseError(RuntimeError):
    """The decompressed stream is not well-formed MEDLINE XML."""

    def __init__(self, message: str, element_path: str, line: int, column: int):
        super().__init__(f"{message} at element path /{element_path} (line {line}, column {column})")
        self.element_path = element_path
        self.line = line
        self.column = column


@dataclass(frozen=True)
class PubRecord:
    """One parsed publication: identifier, text fields, journal, year."""

    pmid: int
    title: str
    abstract: Optional[str]
    journal: str
    year: Optional[int]


class Verdict(enum.Enum):
    """Encoding eligibility of a record's text fields."""

    ELIGIBLE = "eligible-for-encoding"
    TITLE_ONLY = "title-only"
    INVALID = "invalid"


@dataclass
class ParseTally:
    """Running counts for one archive; emitted + skipped == citations."""

    citations: int = 0
    emitted: int = 0
    skipped: int = 0

    def summary(self, name: str = "") -> str:
        label = f" {name}" if name else ""
        return (
            f"archive{label}: {self.citations} citations, "
            f"{self.emitted} records, {self.skipped} skipped"
        )


class _CountingReader:
    """Wraps a binary stream and tracks how many bytes were consumed."""

    def __init__(self, raw: IO[bytes]):
        self._raw = raw
        self.offset = 0

    def read(self, size: int = -1) -> bytes:
        chunk = self._raw.read(size)
        self.offset += len(chunk)
        return chunk


_YEAR4 = re.compile(r"\d{4}")


def _text_of(elem: Optional[ET.Element]) -> str:
    if elem is None:
        return ""
    return "".join(elem.itertext())


def _parse_year(citation: ET.Element) -> Optional[int]:
    pubdate = citation.find("Article/Journal/JournalIssue/PubDate")
    if pubdate is None:
        return None
    year = _text_of(pubdate.find("Year")).strip()
    if re.fullmatch(r"\d{4}", year):
        return int(year)
    # MedlineDate holds free text like "1998 Dec-1999 Jan"; take the first
    # 4-digit run, else the year is unknown.
    m = _YEAR4.search(_text_of(pubdate.find("MedlineDate")))
    return int(m.group()) if m else None


def _parse_abstract(citation: ET.Element) -> Optional[str]:
    sections = []
    for part in citation.findall("Article/Abstract/AbstractText"):
        text = _text_of(part).strip()
        if text:
            sections.append(text)
    joined = " ".join(sections)
    return joined if joined else None


def _record_from_citation(citation: ET.Element) -> Optional[PubRecord]:
    pmid_text = _text_of(citation.find("PMID")).strip()
    if not pmid_text.isdigit():
        return None
    pmid = int(pmid_text)
    if pmid <= 0:
        return None
    return PubRecord(
        pmid=pmid,
        title=_text_of(citation.find("Article/ArticleTitle")).strip(),
        abstract=_parse_abstract(citation),
        journal=_text_of(citation.find("Article/Journal/Title")).strip(),
        year=_parse_year(citation),
    )


def parse_archive(
    source: Union[str, Path, IO[bytes]],
    tally: Optional[ParseTally] = None,
) -> Iterator[PubRecord]:
    """Yield one PubRecord per citation element, in document order.

    ``source`` is a path to a gzip-compressed MEDLINE XML file or an open
    binary stream of the same. Pass a ParseTally to collect the
    citations/emitted/skipped counts; skipped covers citations with a
    missing or non-positive PMID.
    """
    if tally is None:
        tally = ParseTally()
    if isinstance(source, (str, Path)):
        raw: IO[bytes] = open(source, "rb")
        owns = True
    else:
        raw = source
        owns = False
    counting = _CountingReader(raw)
    stream = gzip.GzipFile(fileobj=counting)  # type: ignore[arg-type]
    path_stack: list[str] = []
    root: Optional[ET.Element] = None
    try:
        parser = ET.iterparse(stream, events=("start", "end"))
        for event, elem in parser:
            if event == "start":
                path_stack.append(elem.tag)
                if root is None:
                    root = elem
                continue
            path_stack.pop()
            if elem.tag == "MedlineCitation":
                tally.citations += 1
                record = _record_from_citation(elem)
                if record is None:
                    tally.skipped += 1
                else:
                    tally.emitted += 1
                    yield record
                elem.clear()
                if len(path_stack) == 1 and root is not None:
                    root.clear()
            elif elem.tag == "PubmedArticle" and root is not None:
                # Drop the exhausted article subtree so the root does not
                # accumulate empty children over a multi-GB archive.
                root.clear()
    except ET.ParseError as exc:
        line, column = exc.position
        raise ArchiveParseError(
            "malformed XML", "/".join(path_stack), line, column
        ) from exc
    except (gzip.BadGzipFile, EOFError, zlib.error) as exc:
        raise ArchiveStreamError(f"decompression failed: {exc}", counting.offset) from exc
    finally:
        if owns:
            raw.close()


def validate_record(record: PubRecord) -> Verdict:
    """Classify a record by which text fields are usable for encoding."""
    title_ok = bool(record.title.strip())
    abstract_ok = record.abstract is not None and bool(record.abstract.strip())
    if title_ok and abstract_ok:
        return Verdict.ELIGIBLE
    if title_ok:
        return Verdict.TITLE_ONLY
    return Verdict.INVALID
