"""SQL digesting: turn raw statements into templates and stable ids.

A template is the statement with every hard-coded value replaced by "?":
numeric literals, quoted strings, and bare words on the right-hand side of a
comparison operator (so ``WHERE item_id = ABCDEF`` digests the same as
``WHERE item_id = 123``). Keywords are folded to upper case, identifier case
is preserved, comments are dropped, and whitespace runs collapse to a single
space. Queries that differ only in literal values share one template and
therefore one id.

The id is FNV-1a 64 over the template text; that hash is part of the on-disk
contract, so do not change it without versioning stored artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyInput, UnterminatedString

STATEMENT_KINDS = (
    "SELECT",
    "INSERT",
    "UPDATE",
    "DELETE",
    "REPLACE",
    "CREATE",
    "ALTER",
    "DROP",
    "TRUNCATE",
)

# Enough of the keyword space that digesting never mistakes a keyword for a
# replaceable bare-word value. Not a full grammar on purpose.
KEYWORDS = frozenset(
    """
    select insert update delete replace create alter drop truncate
    from where and or not in is null like between exists
    join inner outer left right full cross on using
    group by order having limit offset distinct all any some
    as into values set table index view database schema
    union except intersect case when then else end
    primary key foreign references unique check default constraint
    add column modify change rename to if cascade restrict
    asc desc true false unknown
    count sum min max avg
    """.split()
)

COMPARISON_OPS = frozenset({"=", "<", ">", "<=", ">=", "<>", "!=", "<=>"})

_STRING = "string"
_NUMBER = "number"
_WORD = "word"
_QUOTED_IDENT = "quoted_ident"
_OP = "op"
_PLACEHOLDER = "placeholder"


@dataclass(frozen=True)
class SqlTemplate:
    """A normalized statement with its kind and referenced tables."""

    text: str
    statement_kind: str
    tables: tuple[str, ...] = ()
    database: str | None = None


@dataclass(frozen=True)
class SqlId:
    """Stable 64-bit identifier of a template, rendered as 16 hex chars."""

    value: int

    @property
    def hex(self) -> str:
        return f"{self.value:016x}"

    def __str__(self) -> str:
        return self.hex


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash. Deterministic across runs and platforms."""
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass
class _Token:
    kind: str
    text: str
    gap_before: bool = False  # whitespace or comment separated it from the previous token


def _lex(sql: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(sql)
    pending_gap = False

    def push(kind: str, text: str) -> None:
        nonlocal pending_gap
        tokens.append(_Token(kind, text, pending_gap))
        pending_gap = False

    while i < n:
        c = sql[i]
        if c.isspace():
            while i < n and sql[i].isspace():
                i += 1
            pending_gap = True
        elif sql.startswith("--", i) or c == "#":
            while i < n and sql[i] != "\n":
                i += 1
            pending_gap = True
        elif sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            i = n if end < 0 else end + 2
            pending_gap = True
        elif c in "'\"":
            quote = c
            j = i + 1
            closed = False
            while j < n:
                if sql[j] == "\\" and j + 1 < n:
                    j += 2
                    continue
                if sql[j] == quote:
                    if j + 1 < n and sql[j + 1] == quote:  # doubled-quote escape
                        j += 2
                        continue
                    closed = True
                    break
                j += 1
            if not closed:
                raise UnterminatedString(f"unclosed {quote} quote at offset {i}")
            push(_STRING, sql[i : j + 1])
            i = j + 1
        elif c == "`":
            end = sql.find("`", i + 1)
            if end < 0:
                raise UnterminatedString(f"unclosed ` quote at offset {i}")
            push(_QUOTED_IDENT, sql[i : end + 1])
            i = end + 1
        elif c.isdigit() or (c == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = i
            if sql.startswith("0x", i) or sql.startswith("0X", i):
                j = i + 2
                while j < n and sql[j] in "0123456789abcdefABCDEF":
                    j += 1
            else:
                seen_dot = False
                while j < n and (sql[j].isdigit() or (sql[j] == "." and not seen_dot)):
                    if sql[j] == ".":
                        seen_dot = True
                    j += 1
                if j < n and sql[j] in "eE":
                    k = j + 1
                    if k < n and sql[k] in "+-":
                        k += 1
                    if k < n and sql[k].isdigit():
                        j = k
                        while j < n and sql[j].isdigit():
                            j += 1
            push(_NUMBER, sql[i:j])
            i = j
        elif c.isalpha() or c in "_$":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] in "_$"):
                j += 1
            push(_WORD, sql[i:j])
            i = j
        elif c == "?":
            push(_PLACEHOLDER, "?")
            i += 1
        else:
            for op in ("<=>", "<=", ">=", "<>", "!=", ":=", "||"):
                if sql.startswith(op, i):
                    push(_OP, op)
                    i += len(op)
                    break
            else:
                push(_OP, c)
                i += 1
    return tokens


def _is_keyword(tok: _Token) -> bool:
    return tok.kind == _WORD and tok.text.lower() in KEYWORDS


def _is_value_position(prev: _Token | None) -> bool:
    """True when a literal right after `prev` reads as a standalone value."""
    if prev is None:
        return True
    if prev.kind == _OP:
        return prev.text not in (")",)
    return _is_keyword(prev)


def digest(sql_text: str) -> SqlTemplate:
    """Normalize a statement into its template (all literals become "?")."""
    if not sql_text or not sql_text.strip():
        raise EmptyInput("cannot digest empty SQL text")

    tokens = _lex(sql_text)
    if not tokens:
        raise EmptyInput("SQL text contains no tokens")

    out: list[str] = []
    prev_meaningful: _Token | None = None
    for idx, tok in enumerate(tokens):
        nxt = tokens[idx + 1] if idx + 1 < len(tokens) else None
        if tok.gap_before and out:
            out.append(" ")
        if tok.kind in (_STRING, _NUMBER):
            # fold a unary minus on a numeric literal into the placeholder
            if (
                tok.kind == _NUMBER
                and out
                and out[-1] == "-"
                and prev_meaningful is not None
                and prev_meaningful.text == "-"
                and _is_value_position(_two_back(tokens, idx))
            ):
                out.pop()
            out.append("?")
        elif tok.kind == _WORD:
            if _is_keyword(tok):
                out.append(tok.text.upper())
            elif (
                prev_meaningful is not None
                and prev_meaningful.kind == _OP
                and prev_meaningful.text in COMPARISON_OPS
                and (nxt is None or nxt.text not in ("(", "."))
            ):
                # bare word used as a comparison value, e.g. item_id = ABCDEF
                out.append("?")
            else:
                out.append(tok.text)
        else:
            out.append(tok.text)
        prev_meaningful = tok

    text = "".join(out).strip()
    kind = _statement_kind(tokens)
    tables, database = _extract_tables(tokens)
    return SqlTemplate(text=text, statement_kind=kind, tables=tuple(tables), database=database)


def _two_back(tokens: list[_Token], idx: int) -> _Token | None:
    return tokens[idx - 2] if idx >= 2 else None


def _statement_kind(tokens: list[_Token]) -> str:
    for tok in tokens:
        if tok.kind == _WORD:
            upper = tok.text.upper()
            return upper if upper in STATEMENT_KINDS else "OTHER"
        if tok.kind == _OP and tok.text == "(":
            continue
        break
    return "OTHER"


_TABLE_INTRO = frozenset({"from", "join", "into", "update", "truncate"})


def _extract_tables(tokens: list[_Token]) -> tuple[list[str], str | None]:
    """Shallow scan for table references; no attempt at full-grammar fidelity."""
    meaningful = tokens
    tables: list[str] = []
    database: str | None = None
    i = 0
    n = len(meaningful)
    while i < n:
        tok = meaningful[i]
        intro = tok.kind == _WORD and tok.text.lower() in _TABLE_INTRO
        if tok.kind == _WORD and tok.text.lower() == "table":
            intro = True
        if not intro:
            i += 1
            continue
        i += 1
        while i < n:
            name, consumed = _read_name(meaningful, i)
            if name is None:
                break
            if name not in tables:
                tables.append(name)
            if database is None and "." in name:
                database = name.split(".", 1)[0]
            i += consumed
            # skip an alias word so "FROM a x, b y" picks up b
            if i < n and meaningful[i].kind == _WORD and not _is_keyword(meaningful[i]):
                i += 1
            if i < n and meaningful[i].text == ",":
                i += 1
                continue
            break
    return tables, database


def _read_name(tokens: list[_Token], i: int) -> tuple[str | None, int]:
    if i >= len(tokens):
        return None, 0
    tok = tokens[i]
    if tok.kind == _QUOTED_IDENT:
        name = tok.text.strip("`")
    elif tok.kind == _WORD and not _is_keyword(tok):
        name = tok.text
    else:
        return None, 0
    consumed = 1
    if i + 2 < len(tokens) and tokens[i + 1].text == "." and tokens[i + 2].kind in (_WORD, _QUOTED_IDENT):
        name = f"{name}.{tokens[i + 2].text.strip('`')}"
        consumed = 3
    return name, consumed


def sql_id(template: SqlTemplate) -> SqlId:
    """Hash a template into its stable identifier."""
    return SqlId(fnv1a64(template.text.encode("utf-8")))


def digest_id(sql_text: str) -> tuple[SqlTemplate, SqlId]:
    """Convenience: digest and hash in one call."""
    template = digest(sql_text)
    return template, sql_id(template)
