"""Solidity frontend: function extraction, tokenization, vocabulary.

Splits raw ``.sol`` text into function-level units paired with their
docstrings, and derives the three textual views of a unit used by the
encoders: body tokens, function-name words, and invoked-API words.
Parsing is lexical (brace tracking + pattern rules), which keeps it
tolerant across Solidity versions; it is not a full grammar.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "FunctionUnit",
    "TokenBundle",
    "TokenCaps",
    "Vocabulary",
    "SolidityParseError",
    "extract_functions",
    "tokenize_code",
    "build_vocabulary",
    "deduplicate",
    "split_identifier",
    "normalize_words",
    "read_corpus",
    "write_corpus",
]

PAD_WORD = "<pad>"
UNK_WORD = "<unk>"

IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
# camelCase / snake_case / digit-run splitter; every piece lowercases to [a-z0-9]+
WORD_PIECE_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+|[0-9]+")

DEFINITION_RE = re.compile(r"\b(function|modifier|fallback|receive)\b")

# keywords that look like calls but are control constructs or declarations
NON_CALL_KEYWORDS = frozenset(
    """
    if else while for do try catch require assert revert return returns emit
    new delete throw function modifier constructor event struct enum mapping
    using unchecked
    """.split()
)

# elementary type names (and common aliases) whose call syntax is a cast
TYPE_CAST_NAMES = frozenset(
    ["address", "payable", "bool", "string", "bytes"]
    + [f"bytes{i}" for i in range(1, 33)]
    + [f"uint{i}" for i in range(8, 264, 8)]
    + [f"int{i}" for i in range(8, 264, 8)]
    + ["uint", "int"]
)


class SolidityParseError(ValueError):
    """File-level lexical failure; ``offset`` is the offending byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class FunctionUnit:
    """One extracted function, modifier, or fallback definition."""

    id: str
    kind: str  # "function" | "modifier" | "fallback"
    name: str  # empty for fallback
    source: str
    docstring: str | None
    path: str
    span: tuple[int, int]  # 1-based (start line, end line), inclusive

    def __post_init__(self):
        if self.kind not in ("function", "modifier", "fallback"):
            raise ValueError(f"unknown unit kind {self.kind!r}")
        if self.kind == "fallback" and self.name:
            raise ValueError("fallback units carry no name")
        if not self.source:
            raise ValueError("unit source must be non-empty")
        if self.span[0] > self.span[1]:
            raise ValueError(f"invalid span {self.span}")


@dataclass(frozen=True)
class TokenCaps:
    """Length caps for the three textual sequences."""

    tokens: int = 100
    name_words: int = 6
    api_words: int = 20


@dataclass(frozen=True)
class TokenBundle:
    """Textual views of one unit: body tokens, name words, API words.

    Sequences are already truncated to their caps; the true (pre-padding)
    length of each is simply ``len()`` of the list.
    """

    tokens: tuple[str, ...]
    name_words: tuple[str, ...]
    api_words: tuple[str, ...]

    def is_empty(self) -> bool:
        return not (self.tokens or self.name_words or self.api_words)


def split_identifier(name: str) -> list[str]:
    """Split a camelCase / snake_case identifier into lowercase words.

    >>> split_identifier("itemCount")
    ['item', 'count']
    >>> split_identifier("item_count")
    ['item', 'count']
    """
    return [piece.lower() for piece in WORD_PIECE_RE.findall(name)]


def normalize_words(text: str) -> list[str]:
    """Normalize free text (docstring, query) into lowercase words."""
    words: list[str] = []
    for chunk in IDENT_RE.findall(text):
        words.extend(split_identifier(chunk))
    return words


def mask_comments_and_strings(source: str) -> tuple[str, list[tuple[int, int, str]]]:
    """Blank comments and string literals, preserving offsets and newlines.

    Returns the masked text and the list of comment spans as
    ``(start, end, kind)`` with kind ``"line"`` or ``"block"`` and ``end``
    exclusive.
    """
    out = list(source)
    comments: list[tuple[int, int, str]] = []
    i, n = 0, len(source)

    def blank(a: int, b: int) -> None:
        for j in range(a, b):
            if out[j] != "\n":
                out[j] = " "

    while i < n:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            end = source.find("\n", i)
            end = n if end == -1 else end
            comments.append((i, end, "line"))
            blank(i, end)
            i = end
        elif ch == "/" and nxt == "*":
            end = source.find("*/", i + 2)
            end = n if end == -1 else end + 2
            comments.append((i, end, "block"))
            blank(i, end)
            i = end
        elif ch in "\"'":
            quote = ch
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == quote or source[j] == "\n":
                    break
                j += 1
            end = min(j + 1, n)
            blank(i, end)
            i = end
        else:
            i += 1
    return "".join(out), comments


def _check_braces(masked: str) -> None:
    stack: list[int] = []
    for i, ch in enumerate(masked):
        if ch == "{":
            stack.append(i)
        elif ch == "}":
            if not stack:
                raise SolidityParseError("unbalanced '}' at file scope", i)
            stack.pop()
    if stack:
        raise SolidityParseError("unclosed '{' at file scope", stack[0])


def _match_forward(masked: str, start: int, open_ch: str, close_ch: str) -> int:
    """Index of the matching close character; ``start`` is at ``open_ch``."""
    depth = 0
    for i in range(start, len(masked)):
        if masked[i] == open_ch:
            depth += 1
        elif masked[i] == close_ch:
            depth -= 1
            if depth == 0:
                return i
    raise SolidityParseError(f"unclosed {open_ch!r}", start)


_COMMENT_LINE_MARKER = re.compile(r"^\s*(///|//|\*+/?|/\*+)\s?")


def _comment_text(source: str, span: tuple[int, int, str]) -> str:
    raw = source[span[0] : span[1]]
    if span[2] == "block":
        raw = re.sub(r"^/\*+", "", raw)
        raw = re.sub(r"\*+/$", "", raw)
    lines = [_COMMENT_LINE_MARKER.sub("", line).strip() for line in raw.splitlines()]
    return " ".join(line for line in lines if line).strip()


def _docstring_before(
    source: str, comments: list[tuple[int, int, str]], def_start: int
) -> str | None:
    """Nearest preceding comment block with no blank line before ``def_start``."""
    # merge consecutive line comments separated only by a newline + indentation
    blocks: list[tuple[int, int, str]] = []
    for span in comments:
        if (
            blocks
            and span[2] == "line"
            and blocks[-1][2] == "line"
            and source[blocks[-1][1] : span[0]].count("\n") == 1
            and source[blocks[-1][1] : span[0]].strip() == ""
        ):
            blocks[-1] = (blocks[-1][0], span[1], "line")
        else:
            blocks.append(span)
    for start, end, kind in reversed(blocks):
        if end > def_start:
            continue
        gap = source[end:def_start]
        if gap.strip() == "" and gap.count("\n") <= 1:
            text = _comment_text(source, (start, end, kind))
            return text or None
        break
    return None


def extract_functions(source: str, path: str = "<memory>") -> list[FunctionUnit]:
    """Extract every function/modifier/fallback definition from a source file.

    Definitions without a body (interface or abstract declarations) are
    skipped. A comment block immediately above a definition becomes its
    docstring. Raises :class:`SolidityParseError` on unbalanced braces at
    file scope; anything else is tolerated per-definition.
    """
    masked, comments = mask_comments_and_strings(source)
    _check_braces(masked)

    units: list[FunctionUnit] = []
    consumed_until = -1
    for match in DEFINITION_RE.finditer(masked):
        start = match.start()
        if start <= consumed_until:
            continue  # inside the previous unit's body
        keyword = match.group(1)

        pos = match.end()
        name = ""
        if keyword == "function":
            name_match = re.match(r"\s*([A-Za-z_$][A-Za-z0-9_$]*)?\s*\(", masked[pos:])
            if not name_match:
                continue  # function type in a parameter list, not a definition
            name = name_match.group(1) or ""
            kind = "function" if name else "fallback"
        elif keyword == "modifier":
            name_match = re.match(r"\s*([A-Za-z_$][A-Za-z0-9_$]*)", masked[pos:])
            if not name_match:
                continue
            name = name_match.group(1)
            kind = "modifier"
        else:  # fallback / receive keyword form
            kind = "fallback"

        paren = masked.find("(", pos)
        if paren == -1:
            continue
        try:
            paren_end = _match_forward(masked, paren, "(", ")")
        except SolidityParseError:
            continue

        # scan to the body opening brace or a ';' (bodyless declaration)
        i = paren_end + 1
        body_open = -1
        while i < len(masked):
            ch = masked[i]
            if ch == "{":
                body_open = i
                break
            if ch == ";":
                break
            if ch == "(":  # modifier arguments, returns(...) clauses
                i = _match_forward(masked, i, "(", ")")
            i += 1
        if body_open == -1:
            consumed_until = i
            continue
        body_close = _match_forward(masked, body_open, "{", "}")
        consumed_until = body_close

        start_line = source.count("\n", 0, start) + 1
        end_line = source.count("\n", 0, body_close) + 1
        unit_id = f"{path}:{name or 'fallback'}:{start_line}"
        units.append(
            FunctionUnit(
                id=unit_id,
                kind=kind,
                name=name,
                source=source[start : body_close + 1],
                docstring=_docstring_before(source, comments, start),
                path=path,
                span=(start_line, end_line),
            )
        )
    return units


def unit_body(unit: FunctionUnit) -> str:
    """Text inside the outermost braces of a unit (empty if none)."""
    masked, _ = mask_comments_and_strings(unit.source)
    open_idx = masked.find("{")
    if open_idx == -1:
        return ""
    close_idx = _match_forward(masked, open_idx, "{", "}")
    return masked[open_idx + 1 : close_idx]


def iter_call_names(masked_code: str) -> list[str]:
    """Callee identifiers of call sites in source order (casts excluded)."""
    names = []
    for m in re.finditer(r"([A-Za-z_$][A-Za-z0-9_$]*)\s*\(", masked_code):
        callee = m.group(1)
        if callee in NON_CALL_KEYWORDS or callee in TYPE_CAST_NAMES:
            continue
        names.append(callee)
    return names


def tokenize_code(unit: FunctionUnit, caps: TokenCaps = TokenCaps()) -> TokenBundle:
    """Derive the three textual sequences of a unit.

    Body identifiers and keywords are camel/snake-split and lowercased;
    numbers, string literals, and operators are dropped. API words are the
    split names of invoked callees (self-defined and built-ins alike) in
    source order.
    """
    body = unit_body(unit)
    tokens: list[str] = []
    for ident in IDENT_RE.findall(body):
        tokens.extend(split_identifier(ident))
        if len(tokens) >= caps.tokens:
            break
    name_words = normalize_words(unit.name)
    api_words: list[str] = []
    for callee in iter_call_names(body):
        api_words.extend(split_identifier(callee))
        if len(api_words) >= caps.api_words:
            break
    return TokenBundle(
        tokens=tuple(tokens[: caps.tokens]),
        name_words=tuple(name_words[: caps.name_words]),
        api_words=tuple(api_words[: caps.api_words]),
    )


@dataclass(frozen=True)
class Vocabulary:
    """Word-to-index map with reserved PAD=0 and UNK=1 slots."""

    words: tuple[str, ...]
    index: dict[str, int] = field(compare=False, repr=False, default_factory=dict)

    PAD = 0
    UNK = 1

    def __post_init__(self):
        if self.words[:2] != (PAD_WORD, UNK_WORD):
            raise ValueError("vocabulary must start with PAD, UNK")
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def get(self, word: str) -> int:
        return self.index.get(word, self.UNK)

    def encode(self, words: Iterable[str]) -> list[int]:
        return [self.get(w) for w in words]


CorpusItem = "TokenBundle | str | Sequence[str]"


def build_vocabulary(items: Iterable, min_count: int = 2) -> Vocabulary:
    """Build a vocabulary from token bundles, raw docstrings, or word lists.

    Words below ``min_count`` map to UNK. Ordering is deterministic:
    descending frequency, ties broken lexicographically.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for item in items:
        if isinstance(item, TokenBundle):
            counts.update(item.tokens)
            counts.update(item.name_words)
            counts.update(item.api_words)
        elif isinstance(item, str):
            counts.update(normalize_words(item))
        else:
            counts.update(item)
    kept = sorted(
        (w for w, c in counts.items() if c >= min_count),
        key=lambda w: (-counts[w], w),
    )
    return Vocabulary(words=(PAD_WORD, UNK_WORD, *kept))


def normalized_source(unit: FunctionUnit) -> str:
    """Comment-stripped, whitespace-collapsed source used for dedup keys."""
    masked, _ = mask_comments_and_strings(unit.source)
    return " ".join(masked.split())


def deduplicate(units: Sequence[FunctionUnit]) -> list[FunctionUnit]:
    """Collapse units with byte-identical normalized source, keeping firsts."""
    seen: set[str] = set()
    kept: list[FunctionUnit] = []
    for unit in units:
        key = normalized_source(unit)
        if key in seen:
            continue
        seen.add(key)
        kept.append(unit)
    return kept


def write_corpus(units: Iterable[FunctionUnit], path: str | Path) -> int:
    """Write units as JSON Lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for u in units:
            record = {
                "id": u.id,
                "kind": u.kind,
                "name": u.name,
                "code": u.source,
                "docstring": u.docstring,
                "path": u.path,
                "span": list(u.span),
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count


def read_corpus(path: str | Path) -> list[FunctionUnit]:
    units = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad corpus line: {exc}") from exc
            units.append(
                FunctionUnit(
                    id=rec["id"],
                    kind=rec["kind"],
                    name=rec["name"],
                    source=rec["code"],
                    docstring=rec.get("docstring"),
                    path=rec.get("path", str(path)),
                    span=tuple(rec.get("span", (1, 1))),
                )
            )
    return units
