"""Lightweight Java lexical analysis.

Tokenization, statement segmentation, and heuristic statement-type tagging.
No parsing: everything here is lexical, which is sufficient because segmented
or ablated test code is only ever re-embedded, never compiled.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fnmatch import fnmatchcase
from pathlib import Path

from .errors import DataError

JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new null package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try var void volatile while""".split()
)

# Primitive / declaration keywords that can end a type in a local declaration.
TYPE_KEYWORDS = frozenset(
    "boolean byte char double float int long short var".split()
)

_CONTROL_HEADER_KEYWORDS = frozenset(
    "if for while do switch try catch finally else synchronized".split()
)


class TokenKind(Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    STRING_LIT = "string_lit"
    CHAR_LIT = "char_lit"
    NUMBER_LIT = "number_lit"
    BOOL_LIT = "bool_lit"
    OPERATOR = "operator"
    PUNCT = "punct"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: tuple[int, int]


@dataclass
class LexResult:
    tokens: list[Token]
    diagnostics: list[str] = field(default_factory=list)


_NUMBER_RE = re.compile(
    r"0[xX][0-9a-fA-F_]+[lL]?"
    r"|0[bB][01_]+[lL]?"
    r"|(?:\d[\d_]*\.[\d_]*|\.\d[\d_]*|\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?"
)
_WORD_RE = re.compile(r"[\w$]+")  # unicode letters allowed, as in Java identifiers

_MULTI_OPERATORS = (
    ">>>=", ">>>", ">>=", "<<=", "==", "!=", "<=", ">=", "&&", "||",
    "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "->",
)
_SINGLE_OPERATORS = frozenset("+-*/%=<>!~&|^?:")
_PUNCT_CHARS = frozenset("(){}[];,.@")


def lex(code: str) -> LexResult:
    """Tokenize Java source (comments assumed already stripped).

    Total on any input: unknown characters become single punct tokens, an
    unterminated string/char literal ends at the line end with a diagnostic.
    """
    tokens: list[Token] = []
    diagnostics: list[str] = []
    i = 0
    n = len(code)
    while i < n:
        ch = code[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isalpha() or ch in "_$":
            m = _WORD_RE.match(code, i)
            if m is not None:
                text = m.group()
                if text in ("true", "false"):
                    kind = TokenKind.BOOL_LIT
                elif text in JAVA_KEYWORDS:
                    kind = TokenKind.KEYWORD
                else:
                    kind = TokenKind.IDENTIFIER
                tokens.append(Token(kind, text, (i, m.end())))
                i = m.end()
                continue
        if ch.isdigit() or (ch == "." and i + 1 < n and code[i + 1].isdigit()):
            m = _NUMBER_RE.match(code, i)
            if m is not None:
                tokens.append(Token(TokenKind.NUMBER_LIT, m.group(), (i, m.end())))
                i = m.end()
                continue
        if ch == '"' or ch == "'":
            start = i
            i += 1
            closed = False
            while i < n:
                if code[i] == "\\" and i + 1 < n:
                    i += 2
                    continue
                if code[i] == ch:
                    i += 1
                    closed = True
                    break
                if code[i] == "\n":
                    break
                i += 1
            if not closed:
                diagnostics.append(f"unterminated literal starting at offset {start}")
            kind = TokenKind.STRING_LIT if ch == '"' else TokenKind.CHAR_LIT
            tokens.append(Token(kind, code[start:i], (start, i)))
            continue
        if code.startswith("::", i):
            tokens.append(Token(TokenKind.PUNCT, "::", (i, i + 2)))
            i += 2
            continue
        matched = False
        for op in _MULTI_OPERATORS:
            if code.startswith(op, i):
                tokens.append(Token(TokenKind.OPERATOR, op, (i, i + len(op))))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if ch in _PUNCT_CHARS:
            tokens.append(Token(TokenKind.PUNCT, ch, (i, i + 1)))
        elif ch in _SINGLE_OPERATORS:
            tokens.append(Token(TokenKind.OPERATOR, ch, (i, i + 1)))
        else:
            diagnostics.append(f"unexpected character {ch!r} at offset {i}")
            tokens.append(Token(TokenKind.PUNCT, ch, (i, i + 1)))
        i += 1
    return LexResult(tokens, diagnostics)


def tokenize(code: str) -> list[Token]:
    return lex(code).tokens


@dataclass(frozen=True)
class Statement:
    text: str
    span: tuple[int, int]
    depth: int


@dataclass
class SegmentResult:
    statements: list[Statement]
    diagnostics: list[str] = field(default_factory=list)


# Tokens after which a '{' opens a value (initializer / lambda body), not a block.
_VALUE_BRACE_PREDECESSORS = {"=", ",", "->", "return", "[", "{"}


def segment(code: str) -> SegmentResult:
    """Split a method body into statements.

    Rules: a ';' outside literals and parentheses ends a statement; a block
    '{' ends the statement that precedes it (so control-flow and method
    headers are their own units); '}' and stray ';' attach to the previous
    statement. Array-initializer and lambda-body braces do not split.
    """
    lexed = lex(code)
    diagnostics = list(lexed.diagnostics)
    statements: list[Statement] = []
    current: list[Token] = []
    paren_depth = 0
    brace_stack: list[str] = []  # "block" | "value"

    def attach_to_previous(token: Token) -> None:
        if statements:
            prev = statements[-1]
            statements[-1] = Statement(
                code[prev.span[0]: token.span[1]], (prev.span[0], token.span[1]), prev.depth
            )
        else:
            statements.append(Statement(token.text, token.span, len(brace_stack)))

    depth_at_start = 0
    for token in lexed.tokens:
        if not current:
            depth_at_start = len(brace_stack)
        text = token.text
        if token.kind is TokenKind.PUNCT and text == "(":
            paren_depth += 1
        elif token.kind is TokenKind.PUNCT and text == ")":
            paren_depth = max(0, paren_depth - 1)

        if paren_depth > 0 or (token.kind is TokenKind.PUNCT and text == ")"):
            current.append(token)
            continue

        if token.kind is TokenKind.PUNCT and text == ";":
            if current:
                current.append(token)
                _flush(statements, code, current, depth_at_start)
                current = []
            else:
                attach_to_previous(token)
            continue
        if token.kind is TokenKind.PUNCT and text == "{":
            prev_text = current[-1].text if current else None
            if prev_text in _VALUE_BRACE_PREDECESSORS:
                brace_stack.append("value")
                current.append(token)
            else:
                brace_stack.append("block")
                current.append(token)
                _flush(statements, code, current, depth_at_start)
                current = []
            continue
        if token.kind is TokenKind.PUNCT and text == "}":
            marker = brace_stack.pop() if brace_stack else None
            if marker is None:
                diagnostics.append(f"unbalanced '}}' at offset {token.span[0]}")
            if marker == "value" and current:
                current.append(token)
            elif current:
                current.append(token)
                _flush(statements, code, current, depth_at_start)
                current = []
            else:
                attach_to_previous(token)
            continue
        current.append(token)

    if current:
        _flush(statements, code, current, depth_at_start)
    if brace_stack:
        diagnostics.append(f"{len(brace_stack)} unclosed brace(s) at end of input")
    return SegmentResult(statements, diagnostics)


def _flush(statements: list[Statement], code: str, tokens: list[Token], depth: int) -> None:
    start = tokens[0].span[0]
    end = tokens[-1].span[1]
    statements.append(Statement(code[start:end], (start, end), depth))


def segment_statements(code: str) -> list[Statement]:
    return segment(code).statements


class StatementType(Enum):
    CONTROL_FLOW = "ControlFlow"
    ASSERTS = "Asserts"
    THREADS = "Threads"
    CONSTANTS = "Constants"
    WAITS = "Waits"
    TIME_RELATED = "TimeRelated"
    EXTERNAL_API_CALLS = "ExternalApiCalls"
    NEW_INSTANCES = "NewInstances"


# Pattern lists are data so they can be overridden from a TOML
# [statement_types] section. Identifier globs match case-insensitively.
DEFAULT_STATEMENT_PATTERNS: dict[str, dict] = {
    "ControlFlow": {"keywords": ["if", "else", "for", "while", "do", "switch", "case"]},
    "Asserts": {"identifiers": ["assert*", "verify*", "expect*", "fail"]},
    "Threads": {"identifiers": ["thread*", "runnable*", "executor*", "join", "interrupt*"]},
    "Constants": {"literals": True},
    "Waits": {"identifiers": ["sleep", "wait*", "await*", "*timeout*"]},
    "TimeRelated": {
        "identifiers": [
            "date*", "calendar*", "currenttimemillis", "nanotime", "instant*",
            "duration*", "timeunit", "clock*", "localdate*", "localtime*",
            "nanoseconds", "microseconds", "milliseconds", "millis", "seconds",
            "minutes", "hours", "days",
        ]
    },
    "ExternalApiCalls": {
        "identifiers": [
            "http*", "*socket*", "port*", "file*", "url*", "uri*",
            "sql*", "jdbc*", "*database*", "connection*", "server*",
        ]
    },
    "NewInstances": {"keywords": ["new"]},
}


def load_statement_patterns(path: str | Path) -> dict[str, dict]:
    """Read a [statement_types] TOML section; unknown type labels are rejected."""
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        fh = Path(path).open("rb")
    except OSError as exc:
        raise DataError(f"cannot read statement patterns {path}: {exc}") from exc
    with fh:
        data = tomllib.load(fh)
    section = data.get("statement_types", {})
    valid = {t.value for t in StatementType}
    patterns = {k: dict(v) for k, v in DEFAULT_STATEMENT_PATTERNS.items()}
    for label, rules in section.items():
        if label not in valid:
            raise DataError(f"unknown statement type {label!r} in {path}")
        patterns[label] = dict(rules)
    return patterns


_LITERAL_KINDS = {TokenKind.NUMBER_LIT, TokenKind.STRING_LIT, TokenKind.BOOL_LIT, TokenKind.CHAR_LIT}


def classify_statement(
    stmt: Statement | str,
    patterns: dict[str, dict] | None = None,
) -> set[StatementType]:
    """Tag a statement with all matching statement types (possibly none)."""
    text = stmt.text if isinstance(stmt, Statement) else stmt
    if patterns is None:
        patterns = DEFAULT_STATEMENT_PATTERNS
    tokens = tokenize(text)
    keywords = {t.text for t in tokens if t.kind is TokenKind.KEYWORD}
    identifiers = [t.text.lower() for t in tokens if t.kind is TokenKind.IDENTIFIER]
    has_literal = any(t.kind in _LITERAL_KINDS for t in tokens)

    tags: set[StatementType] = set()
    for label, rules in patterns.items():
        stype = StatementType(label)
        if rules.get("literals") and has_literal:
            tags.add(stype)
            continue
        if keywords.intersection(rules.get("keywords", ())):
            tags.add(stype)
            continue
        globs = rules.get("identifiers", ())
        if any(fnmatchcase(ident, pat) for ident in identifiers for pat in globs):
            tags.add(stype)
    return tags
