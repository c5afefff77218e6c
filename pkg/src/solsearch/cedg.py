"""Contract Elements Dependency Graph (CEDG) construction.

A CEDG is a per-function graph over three node categories (Invocation,
Variable, Fallback) with fourteen typed, ordered edge kinds covering
control flow (IF/IE/WH/FR/TC/AT/RT/RQ/BS/BE/NS), data flow (AS/AC), and
fallback reachability (FB). Construction is pattern matching over the
lexical statement structure, not a full Solidity grammar.

Edge emission rules, in statement order:

* entering a block links the current cursor element to the first element
  of the block's first statement (BS); later statements arrive via NS,
  or via their control type (IF/IE/WH/FR/TC) for control statements;
* assignments add AS edges from the assigned variable to each top-level
  right-hand-side element (a self-loop when the right side has none);
* ``require``/``assert``/``revert`` guards add one RQ/AT/RT edge from the
  first to the last element of their condition, which also covers the
  reads inside the condition;
* variable reads elsewhere add AC edges: self-loops for bare reads, and
  invocation-to-argument edges for call arguments;
* a block close adds a BE self-loop on the block's last element;
* if the contract defines a fallback, FB edges from the Fallback node to
  every Invocation node are appended last.

Subscript contents (``deposits[msg.sender]``) and call receivers
(``msg.sender.transfer``) belong to the enclosing element and never form
nodes of their own. The cursor is the most recently executed element.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Sequence

from .frontend import IDENT_RE, FunctionUnit, mask_comments_and_strings

__all__ = [
    "CedgNode",
    "CedgEdge",
    "Cedg",
    "CedgParseError",
    "EDGE_TYPES",
    "NODE_CATEGORIES",
    "SOL_TYPES",
    "build_cedg",
    "validate",
    "serialize",
    "deserialize",
    "to_dot",
]

EDGE_TYPES = (
    "IF", "IE", "WH", "FR", "TC", "AT", "RT",
    "RQ", "BS", "BE", "NS", "AS", "AC", "FB",
)
NODE_CATEGORIES = ("Invocation", "Variable", "Fallback")

# canonical solType strings used by the node embedder; anything else maps
# to "unknown" at embedding time
SOL_TYPES = (
    "unknown", "internal", "external", "public", "private", "fallback",
    "uint", "int", "address", "bool", "string", "bytes", "mapping",
)

_ELEMENTARY_TYPE = re.compile(r"^(uint|int|bytes)[0-9]*$")
_TYPE_WORDS = frozenset(["address", "bool", "string", "mapping", "var"])

_BUILTIN_VARS = {
    "msg.sender": "address",
    "msg.value": "uint",
    "msg.data": "bytes",
    "msg.sig": "bytes",
    "msg.gas": "uint",
    "tx.origin": "address",
    "tx.gasprice": "uint",
    "block.timestamp": "uint",
    "block.number": "uint",
    "block.difficulty": "uint",
    "block.coinbase": "address",
    "block.gaslimit": "uint",
    "now": "uint",
    "this": "address",
}
_BUILTIN_NAMESPACES = frozenset(["msg", "tx", "block", "abi"])

# address-member and global built-in callees, typed as external calls and
# internal primitives respectively
_MEMBER_API = frozenset(
    ["transfer", "send", "call", "delegatecall", "staticcall", "value", "gas"]
)
_GLOBAL_API = frozenset(
    [
        "keccak256", "sha3", "sha256", "ripemd160", "ecrecover",
        "addmod", "mulmod", "selfdestruct", "suicide", "gasleft", "blockhash",
    ]
)

_GUARD_TYPES = {"require": "RQ", "assert": "AT", "revert": "RT"}

# words that never become elements on their own
_SKIP_WORDS = frozenset(
    """
    if else while for do try catch require assert revert return returns emit
    new delete throw function modifier constructor event struct enum using
    unchecked assembly break continue is memory storage calldata public
    private internal external pure view payable constant virtual override
    indexed anonymous true false wei gwei szabo finney ether seconds minutes
    hours days weeks years _
    """.split()
)

_CAST_WORDS = frozenset(
    ["address", "payable", "bool", "string", "bytes", "uint", "int"]
)


class CedgParseError(ValueError):
    """Raised when serialized graph text cannot be decoded."""


@dataclass(frozen=True)
class CedgNode:
    id: int
    category: str  # Invocation | Variable | Fallback
    sol_type: str
    name: str


@dataclass(frozen=True)
class CedgEdge:
    vs: int
    ve: int
    etype: str
    order: int


@dataclass(frozen=True)
class Cedg:
    nodes: tuple[CedgNode, ...]
    edges: tuple[CedgEdge, ...]

    def node_by_name(self, name: str) -> CedgNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


# ---------------------------------------------------------------------------
# lexical helpers


def _is_type_word(word: str) -> bool:
    return word in _TYPE_WORDS or bool(_ELEMENTARY_TYPE.match(word))


def _normalize_type(word: str) -> str:
    m = _ELEMENTARY_TYPE.match(word)
    if m:
        return m.group(1)
    return word


def _skip_ws(text: str, i: int) -> int:
    n = len(text)
    while i < n and text[i] in " \t\r\n":
        i += 1
    return i


def _match(text: str, start: int, open_ch: str, close_ch: str) -> int:
    depth = 0
    for i in range(start, len(text)):
        if text[i] == open_ch:
            depth += 1
        elif text[i] == close_ch:
            depth -= 1
            if depth == 0:
                return i
    return len(text) - 1  # tolerate truncation


_NUMBER_RE = re.compile(r"[0-9][0-9a-zA-Z_]*(\.[0-9]+)?([eE][0-9]+)?")


@dataclass
class _Element:
    kind: str  # "var" | "call"
    name: str
    children: list["_Element"] = field(default_factory=list)


def _scan_elements(text: str, types: dict[str, str]) -> list[_Element]:
    """Elements of an expression region in source order.

    Subscript contents are swallowed into the base variable's mention;
    member-call chains contribute only the final callee name; cast and
    grouping parentheses are transparent. Declared types encountered on
    the way are recorded in ``types``.
    """
    elements: list[_Element] = []
    pending_type: str | None = None
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isalpha() or ch in "_$":
            m = IDENT_RE.match(text, i)
            assert m is not None
            word = m.group(0)
            if _is_type_word(word):
                # a cast looks like a call; scan its inside transparently
                j = _skip_ws(text, m.end())
                if j < n and text[j] == "(" and word in _CAST_WORDS:
                    close = _match(text, j, "(", ")")
                    elements.extend(_scan_elements(text[j + 1 : close], types))
                    i = close + 1
                else:
                    pending_type = _normalize_type(word)
                    i = m.end()
                continue

            # walk the postfix chain: .member and [subscript]
            names = [word]
            subscripted = False
            k = m.end()
            while True:
                j = _skip_ws(text, k)
                if j < n and text[j] == "[":
                    close = _match(text, j, "[", "]")
                    if len(names) == 1:
                        subscripted = True
                    k = close + 1
                    continue
                if j < n and text[j] == ".":
                    m2 = IDENT_RE.match(text, _skip_ws(text, j + 1))
                    if not m2:
                        break
                    names.append(m2.group(0))
                    k = m2.end()
                    continue
                break

            j = _skip_ws(text, k)
            if j < n and text[j] == "(":
                close = _match(text, j, "(", ")")
                callee = names[-1]
                if callee in _SKIP_WORDS:
                    elements.extend(_scan_elements(text[j + 1 : close], types))
                else:
                    children = _scan_elements(text[j + 1 : close], types)
                    elements.append(_Element("call", callee, children))
                pending_type = None
                i = close + 1
                continue

            base = names[0]
            if base in _BUILTIN_NAMESPACES:
                dotted = ".".join(names[:2])
                if dotted in _BUILTIN_VARS:
                    types.setdefault(dotted, _BUILTIN_VARS[dotted])
                    elements.append(_Element("var", dotted))
            elif base in _BUILTIN_VARS:
                types.setdefault(base, _BUILTIN_VARS[base])
                elements.append(_Element("var", base))
            elif base not in _SKIP_WORDS:
                if pending_type:
                    types.setdefault(base, pending_type)
                elif subscripted:
                    types.setdefault(base, "mapping")
                elements.append(_Element("var", base))
            pending_type = None
            i = k
        elif ch.isdigit():
            m = _NUMBER_RE.match(text, i)
            i = m.end() if m else i + 1
        else:
            i += 1
    return elements


# ---------------------------------------------------------------------------
# statement structure


@dataclass
class _Simple:
    text: str


@dataclass
class _If:
    cond: str
    then: list
    other: list | None


@dataclass
class _Loop:
    etype: str  # WH | FR
    header: str
    body: list


@dataclass
class _DoWhile:
    body: list
    cond: str


@dataclass
class _Try:
    expr: str
    body: list
    catches: list


@dataclass
class _Nested:
    body: list


def _parse_region(text: str) -> list:
    stmts = []
    i = 0
    while i < len(text):
        stmt, i = _parse_one(text, i)
        if stmt is not None:
            stmts.append(stmt)
    return stmts


def _parse_block_or_single(text: str, i: int) -> tuple[list, int]:
    i = _skip_ws(text, i)
    if i < len(text) and text[i] == "{":
        close = _match(text, i, "{", "}")
        return _parse_region(text[i + 1 : close]), close + 1
    stmt, i = _parse_one(text, i)
    return ([stmt] if stmt is not None else []), i


def _parse_one(text: str, i: int):
    n = len(text)
    i = _skip_ws(text, i)
    if i >= n:
        return None, n
    ch = text[i]
    if ch == ";":
        return None, i + 1
    if ch == "{":
        close = _match(text, i, "{", "}")
        return _Nested(_parse_region(text[i + 1 : close])), close + 1

    m = IDENT_RE.match(text, i)
    word = m.group(0) if m else ""

    if word in ("if", "while", "for"):
        p = text.find("(", m.end())
        if p == -1:
            return None, m.end()
        close = _match(text, p, "(", ")")
        header = text[p + 1 : close]
        body, i2 = _parse_block_or_single(text, close + 1)
        if word == "if":
            other = None
            j = _skip_ws(text, i2)
            m2 = IDENT_RE.match(text, j)
            if m2 and m2.group(0) == "else":
                other, i2 = _parse_block_or_single(text, m2.end())
            return _If(header, body, other), i2
        return _Loop("WH" if word == "while" else "FR", header, body), i2

    if word == "do":
        body, i2 = _parse_block_or_single(text, m.end())
        j = _skip_ws(text, i2)
        m2 = IDENT_RE.match(text, j)
        cond = ""
        if m2 and m2.group(0) == "while":
            p = text.find("(", m2.end())
            if p != -1:
                close = _match(text, p, "(", ")")
                cond = text[p + 1 : close]
                i2 = close + 1
        return _DoWhile(body, cond), i2

    if word == "try":
        brace = text.find("{", m.end())
        if brace == -1:
            return None, m.end()
        expr = text[m.end() : brace]
        close = _match(text, brace, "{", "}")
        body = _parse_region(text[brace + 1 : close])
        catches = []
        i2 = close + 1
        while True:
            j = _skip_ws(text, i2)
            m2 = IDENT_RE.match(text, j)
            if not (m2 and m2.group(0) == "catch"):
                break
            brace = text.find("{", m2.end())
            if brace == -1:
                break
            close = _match(text, brace, "{", "}")
            catches.append(_parse_region(text[brace + 1 : close]))
            i2 = close + 1
        return _Try(expr, body, catches), i2

    if word == "unchecked":
        brace = text.find("{", m.end())
        if brace == -1:
            return None, m.end()
        close = _match(text, brace, "{", "}")
        return _Nested(_parse_region(text[brace + 1 : close])), close + 1

    if word == "assembly":  # skipped verbatim
        brace = text.find("{", m.end() if m else i)
        if brace == -1:
            return None, n
        close = _match(text, brace, "{", "}")
        return None, close + 1

    # plain statement up to ';' at depth 0
    depth = 0
    j = i
    while j < n:
        c = text[j]
        if c in "([{":
            depth += 1
        elif c in ")]}":
            depth -= 1
        elif c == ";" and depth <= 0:
            break
        j += 1
    return _Simple(text[i:j].strip()), j + 1


_ASSIGN_SPLIT_EXCLUDE = frozenset("=!<>")


def _find_assignment(text: str) -> int:
    """Offset of a top-level assignment '=', or -1."""
    depth = 0
    for i, ch in enumerate(text):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == "=" and depth == 0:
            prev = text[i - 1] if i > 0 else ""
            nxt = text[i + 1] if i + 1 < len(text) else ""
            if prev in _ASSIGN_SPLIT_EXCLUDE or nxt in ("=", ">"):
                continue
            return i
    return -1


def _has_incdec(text: str) -> bool:
    depth = 0
    for i in range(len(text) - 1):
        ch = text[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif depth == 0 and text[i : i + 2] in ("++", "--"):
            return True
    return False


# ---------------------------------------------------------------------------
# graph building


def _signature_and_body(unit: FunctionUnit) -> tuple[str, str]:
    masked, _ = mask_comments_and_strings(unit.source)
    brace = masked.find("{")
    if brace == -1:
        return masked, ""
    close = _match(masked, brace, "{", "}")
    return masked[:brace], masked[brace + 1 : close]


def _visibility(unit: FunctionUnit) -> str:
    head, _ = _signature_and_body(unit)
    m = re.search(r"\b(internal|external|public|private)\b", head)
    if m:
        return m.group(1)
    return "internal" if unit.kind == "modifier" else "public"


class _Builder:
    def __init__(self, unit: FunctionUnit, context: Sequence[FunctionUnit]):
        self.unit = unit
        self.types: dict[str, str] = {}
        self.context_visibility = {
            u.name: _visibility(u) for u in context if u.name
        }
        if unit.name:
            self.context_visibility.setdefault(unit.name, _visibility(unit))
        self.nodes: list[CedgNode] = []
        self.key_to_id: dict[tuple[str, str], int] = {}
        self.edges: list[CedgEdge] = []
        self.has_fallback = unit.kind == "fallback" or any(
            u.kind == "fallback" for u in context
        )
        if unit.kind == "fallback":
            self.def_id = self._add_node("Fallback", "fallback", "0")
        else:
            self.def_id = self._add_node(
                "Invocation", _visibility(unit), unit.name
            )
        self.cursor = self.def_id

    # --- nodes

    def _add_node(self, category: str, sol_type: str, name: str) -> int:
        key = (category if category != "Fallback" else "Fallback", name)
        if key in self.key_to_id:
            return self.key_to_id[key]
        node = CedgNode(len(self.nodes), category, sol_type, name)
        self.nodes.append(node)
        self.key_to_id[key] = node.id
        return node.id

    def _var_node(self, name: str) -> int:
        return self._add_node("Variable", self.types.get(name, "unknown"), name)

    def _call_node(self, name: str) -> int:
        if name in self.context_visibility:
            sol_type = self.context_visibility[name]
        elif name in _MEMBER_API:
            sol_type = "external"
        elif name in _GLOBAL_API:
            sol_type = "internal"
        else:
            sol_type = "unknown"
        return self._add_node("Invocation", sol_type, name)

    def _materialize(self, elements: list[_Element]) -> None:
        """Create nodes for an element tree, depth-first in source order."""
        for el in elements:
            if el.kind == "var":
                self._var_node(el.name)
            else:
                self._call_node(el.name)
                self._materialize(el.children)

    def _node_of(self, el: _Element) -> int:
        if el.kind == "var":
            return self._var_node(el.name)
        return self._call_node(el.name)

    # --- edges

    def _emit(self, vs: int, ve: int, etype: str) -> None:
        self.edges.append(CedgEdge(vs, ve, etype, len(self.edges) + 1))

    def _arrival(self, head: int, is_first: bool, extra: str | None,
                 control: str | None = None) -> None:
        if extra is not None:
            self._emit(self.cursor, head, extra)
        if is_first:
            self._emit(self.cursor, head, "BS")
            if control is not None:
                self._emit(self.cursor, head, control)
        elif control is not None:
            self._emit(self.cursor, head, control)
        else:
            self._emit(self.cursor, head, "NS")

    def _access_edges(self, elements: list[_Element], seen_vars: set[int]) -> None:
        """AC self-loops for bare reads, call-to-argument AC edges."""
        for el in elements:
            if el.kind == "var":
                node = self._var_node(el.name)
                if node not in seen_vars:
                    seen_vars.add(node)
                    self._emit(node, node, "AC")
            else:
                call = self._call_node(el.name)
                for child in el.children:
                    self._emit(call, self._node_of(child), "AC")
                    if child.kind == "call":
                        self._arg_edges(child)

    def _arg_edges(self, call_el: _Element) -> None:
        call = self._call_node(call_el.name)
        for child in call_el.children:
            self._emit(call, self._node_of(child), "AC")
            if child.kind == "call":
                self._arg_edges(child)

    def _call_arg_edges_only(self, elements: list[_Element]) -> None:
        for el in elements:
            if el.kind == "call":
                self._arg_edges(el)

    # --- statements

    def walk_block(self, stmts: list, extra_arrival: str | None = None) -> bool:
        emitted = False
        for stmt in stmts:
            produced = self._process(
                stmt,
                is_first=not emitted,
                extra=extra_arrival if not emitted else None,
            )
            emitted = emitted or produced
        if emitted:
            self._emit(self.cursor, self.cursor, "BE")
        return emitted

    def _process(self, stmt, is_first: bool, extra: str | None) -> bool:
        if isinstance(stmt, _Simple):
            return self._process_simple(stmt.text, is_first, extra)
        if isinstance(stmt, _If):
            return self._process_if(stmt, is_first, extra)
        if isinstance(stmt, _Loop):
            return self._process_header_block(
                stmt.etype, stmt.header, [stmt.body], is_first, extra
            )
        if isinstance(stmt, _DoWhile):
            produced = self.walk_block(stmt.body)
            produced |= self._process_condition("WH", stmt.cond, is_first and not produced, None)
            return produced
        if isinstance(stmt, _Try):
            blocks = [stmt.body] + list(stmt.catches)
            return self._process_header_block("TC", stmt.expr, blocks, is_first, extra)
        if isinstance(stmt, _Nested):
            return self.walk_block(stmt.body)
        return False

    def _process_condition(self, etype: str, header: str, is_first: bool,
                           extra: str | None) -> bool:
        elements = _scan_elements(header, self.types)
        if not elements:
            return False
        self._materialize(elements)
        head = self._node_of(elements[0])
        self._arrival(head, is_first, extra, control=etype)
        self._access_edges(elements, set())
        self.cursor = self._node_of(elements[-1])
        return True

    def _process_header_block(self, etype: str, header: str, blocks: list,
                              is_first: bool, extra: str | None) -> bool:
        produced = self._process_condition(etype, header, is_first, extra)
        for idx, block in enumerate(blocks):
            block_extra = etype if (idx > 0 and etype == "TC") else None
            produced |= self.walk_block(block, extra_arrival=block_extra)
        return produced

    def _process_if(self, stmt: _If, is_first: bool, extra: str | None) -> bool:
        produced = self._process_condition("IF", stmt.cond, is_first, extra)
        produced |= self.walk_block(stmt.then)
        if stmt.other is not None:
            produced |= self.walk_block(stmt.other, extra_arrival="IE")
        return produced

    def _process_simple(self, text: str, is_first: bool, extra: str | None) -> bool:
        if not text:
            return False
        m = IDENT_RE.match(text)
        first_word = m.group(0) if m else ""

        if first_word in _GUARD_TYPES:
            condition = text[m.end() :]
            elements = _scan_elements(condition, self.types)
            if not elements:
                return False
            self._materialize(elements)
            head = self._node_of(elements[0])
            tail = self._node_of(elements[-1])
            self._arrival(head, is_first, extra)
            self._emit(head, tail, _GUARD_TYPES[first_word])
            self._call_arg_edges_only(elements)
            self.cursor = tail
            return True

        eq = _find_assignment(text)
        if eq == -1 and _has_incdec(text):
            stripped = text.replace("++", " ").replace("--", " ")
            elements = _scan_elements(stripped, self.types)
            if not elements:
                return False
            self._materialize(elements)
            lhs = self._node_of(elements[0])
            self._arrival(lhs, is_first, extra)
            self._emit(lhs, lhs, "AS")
            self.cursor = lhs
            return True

        if eq != -1:
            lhs_text = text[:eq].rstrip("+-*/%&|^")
            rhs_text = text[eq + 1 :]
            lhs_elements = _scan_elements(lhs_text, self.types)
            if not lhs_elements:
                return self._process_plain(text, is_first, extra)
            rhs_elements = _scan_elements(rhs_text, self.types)
            self._materialize(lhs_elements[:1])
            lhs = self._node_of(lhs_elements[0])
            self._materialize(rhs_elements)
            self._arrival(lhs, is_first, extra)
            if rhs_elements:
                for el in rhs_elements:
                    self._emit(lhs, self._node_of(el), "AS")
            else:
                self._emit(lhs, lhs, "AS")
            self._call_arg_edges_only(rhs_elements)
            self.cursor = self._node_of(rhs_elements[-1]) if rhs_elements else lhs
            return True

        return self._process_plain(text, is_first, extra)

    def _process_plain(self, text: str, is_first: bool, extra: str | None) -> bool:
        # bare declarations register a type but produce no elements
        words = IDENT_RE.findall(text)
        if (
            len(words) == 2
            and _is_type_word(words[0])
            and "(" not in text
        ):
            self.types.setdefault(words[1], _normalize_type(words[0]))
            return False
        elements = _scan_elements(text, self.types)
        if not elements:
            return False
        self._materialize(elements)
        head = self._node_of(elements[0])
        self._arrival(head, is_first, extra)
        self._access_edges(elements, set())
        self.cursor = self._node_of(elements[-1])
        return True

    # --- signature + fallback

    def register_signature(self) -> None:
        head, _ = _signature_and_body(self.unit)
        paren = head.find("(")
        if paren == -1:
            return
        close = _match(head, paren, "(", ")")
        for param in head[paren + 1 : close].split(","):
            idents = IDENT_RE.findall(param)
            if len(idents) >= 2 and _is_type_word(idents[0]):
                self.types.setdefault(idents[-1], _normalize_type(idents[0]))
            elif len(idents) >= 2:  # user-defined type
                self.types.setdefault(idents[-1], "unknown")
        # modifier mentions between the parameter list and the body
        tail = head[close + 1 :]
        pos = 0
        while True:
            m = IDENT_RE.search(tail, pos)
            if not m:
                break
            word = m.group(0)
            pos = m.end()
            if word == "returns":
                p = tail.find("(", pos)
                if p != -1:
                    pos = _match(tail, p, "(", ")") + 1
                continue
            if word in _SKIP_WORDS or _is_type_word(word):
                continue
            self._call_node(word)
            p = _skip_ws(tail, pos)
            if p < len(tail) and tail[p] == "(":  # modifier arguments swallowed
                pos = _match(tail, p, "(", ")") + 1

    def finish_fallback(self) -> None:
        if not self.has_fallback:
            return
        if self.unit.kind == "fallback":
            fb = self.def_id
        else:
            fb = self._add_node("Fallback", "fallback", "0")
        for node in list(self.nodes):
            if node.category == "Invocation":
                self._emit(fb, node.id, "FB")


def build_cedg(unit: FunctionUnit, contract_context: Sequence[FunctionUnit] = ()) -> Cedg:
    """Build the dependency graph of one unit.

    ``contract_context`` supplies the sibling units of the same contract:
    it decides whether a Fallback node exists and provides visibility for
    self-defined callees. A unit with no recognizable elements yields the
    single definition node and zero edges.
    """
    builder = _Builder(unit, contract_context)
    builder.register_signature()
    _, body = _signature_and_body(unit)
    builder.walk_block(_parse_region(body))
    builder.finish_fallback()
    return Cedg(nodes=tuple(builder.nodes), edges=tuple(builder.edges))


# ---------------------------------------------------------------------------
# validation and serialization


def validate(g: Cedg) -> list[str]:
    """All invariant violations of a graph; empty means well-formed."""
    violations: list[str] = []
    for pos, node in enumerate(g.nodes):
        if node.id != pos:
            violations.append(f"node at position {pos} has id {node.id}; ids must be dense")
        if node.category not in NODE_CATEGORIES:
            violations.append(f"node {node.id}: unknown category {node.category!r}")
        if node.category == "Fallback" and (node.name != "0" or node.sol_type != "fallback"):
            violations.append(f"node {node.id}: Fallback must have name '0' and type 'fallback'")
    fallbacks = [n for n in g.nodes if n.category == "Fallback"]
    if len(fallbacks) > 1:
        violations.append(f"{len(fallbacks)} Fallback nodes; at most one allowed")

    n_nodes = len(g.nodes)
    orders: dict[int, int] = {}
    for edge in g.edges:
        if not (0 <= edge.vs < n_nodes):
            violations.append(f"edge order {edge.order}: start node {edge.vs} does not exist")
        if not (0 <= edge.ve < n_nodes):
            violations.append(f"edge order {edge.order}: end node {edge.ve} does not exist")
        if edge.etype not in EDGE_TYPES:
            violations.append(f"edge order {edge.order}: unknown type {edge.etype!r}")
        if edge.etype == "FB" and (not fallbacks or edge.vs != fallbacks[0].id):
            violations.append(f"edge order {edge.order}: FB edge must start at the Fallback node")
        orders[edge.order] = orders.get(edge.order, 0) + 1
    for order, count in sorted(orders.items()):
        if count > 1:
            violations.append(f"order {order} used {count} times")
        if not (1 <= order <= len(g.edges)):
            violations.append(f"order {order} outside 1..{len(g.edges)}")
    for missing in range(1, len(g.edges) + 1):
        if missing not in orders:
            violations.append(f"order {missing} missing")
    return violations


def serialize(g: Cedg) -> str:
    """Canonical JSON text of a graph; requires a valid graph."""
    violations = validate(g)
    if violations:
        raise ValueError("cannot serialize invalid graph: " + "; ".join(violations))
    doc = {
        "nodes": [
            {"id": n.id, "category": n.category, "type": n.sol_type, "name": n.name}
            for n in g.nodes
        ],
        "edges": [
            {"vs": e.vs, "ve": e.ve, "type": e.etype, "order": e.order}
            for e in g.edges
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def deserialize(text: str) -> Cedg:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CedgParseError(
            f"line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        nodes = tuple(
            CedgNode(n["id"], n["category"], n["type"], n["name"])
            for n in doc["nodes"]
        )
        edges = tuple(
            CedgEdge(e["vs"], e["ve"], e["type"], e["order"])
            for e in doc["edges"]
        )
    except (KeyError, TypeError) as exc:
        raise CedgParseError(f"malformed graph document: {exc!r}") from exc
    return Cedg(nodes=nodes, edges=edges)


def to_dot(g: Cedg) -> str:
    """Graphviz DOT rendering for visual inspection."""
    lines = ["digraph cedg {"]
    for n in g.nodes:
        label = f"{n.category[0]}|{n.sol_type}|{n.name}"
        shape = {"Invocation": "box", "Variable": "ellipse", "Fallback": "diamond"}[
            n.category
        ]
        lines.append(f'  n{n.id} [label="{label}", shape={shape}];')
    for e in g.edges:
        lines.append(f'  n{e.vs} -> n{e.ve} [label="{e.etype}#{e.order}"];')
    lines.append("}")
    return "\n".join(lines)
