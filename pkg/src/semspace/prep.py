"""Deterministic normalization of title+abstract text before encoding.

The transform is: collapse whitespace runs, join title and abstract with a
separating period, lowercase, then replace digit-bearing token cores with
the literal mask token ``<NUM>``. The mask token keeps its uppercase
spelling. Non-ASCII digits are left alone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

# Within one whitespace-delimited token, the masked core runs from the
# first ASCII digit to the last. Greedy ".*" pins the span; everything
# around it (letters or punctuation) is preserved verbatim.
_DIGIT_CORE = re.compile(r"[0-9].*[0-9]|[0-9]")

_TERMINAL_PUNCT = (".", "!", "?")

MASK_TOKEN = "<NUM>"


@dataclass(frozen=True)
class NormalizedText:
    """Encoder-ready text plus the record it came from."""

    text: str
    source_pmid: int = 0


class EmptyFieldError(ValueError):
    """Raised when normalize() is given an empty title or abstract."""


def mask_numbers(text: str) -> str:
    """Replace the digit-bearing core of every token with ``<NUM>``.

    A token is a maximal run of non-whitespace characters. If it contains
    at least one ASCII digit, the span from its first digit to its last is
    replaced by the mask token; leading and trailing non-digit characters
    are preserved. Digit-free tokens pass through unchanged, as does all
    whitespace.
    """
    parts = re.split(r"(\s+)", text)
    for i in range(0, len(parts), 2):
        if parts[i]:
            parts[i] = _DIGIT_CORE.sub(MASK_TOKEN, parts[i], count=1)
    return "".join(parts)


def _collapse(text: str) -> str:
    # str.split() with no argument trims and splits on any whitespace run.
    return " ".join(text.split())


def normalize(title: str, abstract: str, source_pmid: int = 0) -> NormalizedText:
    """Build the exact text handed to encoders for one record.

    Title and abstract are whitespace-collapsed, joined with ". " (just a
    space when the title already ends in terminal punctuation), lowercased,
    and number-masked. Raises EmptyFieldError when either field is empty
    after trimming; run validate_record upstream to filter those out.
    """
    t = _collapse(title)
    a = _collapse(abstract)
    if not t:
        raise EmptyFieldError("title is empty after trimming")
    if not a:
        raise EmptyFieldError("abstract is empty after trimming")
    sep = " " if t.endswith(_TERMINAL_PUNCT) else ". "
    return NormalizedText(text=mask_numbers((t + sep + a).lower()), source_pmid=source_pmid)
