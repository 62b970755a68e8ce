"""Corpus oversampling by mutating flakiness-irrelevant code elements.

Each augmented copy renames locally declared variables to fresh wordlist
names and perturbs string/number/boolean literals, keeping everything else
(method names, API calls, structure) byte-identical. The mutations preserve
the token-kind sequence and statement count of the original, so only the
surface vocabulary changes.
"""
from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field, replace

from .corpus import Category, FlakyTest
from .errors import DataError, InternalError
from .javatok import JAVA_KEYWORDS, TYPE_KEYWORDS, Token, TokenKind, tokenize
from .wordlist import WORDS

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentationConfig:
    copies_per_test: int = 2
    seed: int = 0
    wordlist: tuple[str, ...] = field(default=WORDS)

    def __post_init__(self):
        if self.copies_per_test < 0:
            raise ValueError("copies_per_test must be >= 0")
        if not self.wordlist:
            raise ValueError("wordlist must be non-empty")


def _derived_rng(seed: int, *parts: object) -> random.Random:
    """Stable per-test RNG stream; independent of Python hash randomization."""
    digest = hashlib.sha256(repr((seed,) + parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _is_generic_close(tokens: list[Token], gt_index: int) -> bool:
    """Heuristic: does this '>' close a generic type rather than compare?

    Walks back looking for a matching '<' passing only through tokens that
    can occur inside a type argument list.
    """
    depth = 1
    allowed_texts = {",", ".", "?", "extends", "super", "[", "]", "&"}
    i = gt_index - 1
    while i >= 0:
        tok = tokens[i]
        if tok.text == ">":
            depth += 1
        elif tok.text == "<":
            depth -= 1
            if depth == 0:
                return True
        elif tok.kind is TokenKind.IDENTIFIER or tok.text in allowed_texts:
            pass
        else:
            return False
        i -= 1
    return False


def _declared_names(tokens: list[Token]) -> list[str]:
    """Names introduced by local declarations, in first-seen order.

    Covers `Type name = ...`, `Type name;`, multi-declarators, for-loop
    inits, enhanced-for variables, catch params, and lambda params. Method
    and field names never match: they are either followed by '(' or
    preceded by '.'.
    """
    declared: list[str] = []
    seen: set[str] = set()

    def add(name: str) -> None:
        if name not in seen:
            seen.add(name)
            declared.append(name)

    for i, tok in enumerate(tokens):
        if tok.kind is not TokenKind.IDENTIFIER:
            continue
        prev = tokens[i - 1] if i > 0 else None
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if nxt is None or nxt.text not in {"=", ";", ":", ",", ")"}:
            continue
        if nxt.text == "=" and i + 2 < len(tokens) and tokens[i + 2].text == "=":
            continue  # '==' comparison split defensively
        if prev is None:
            continue
        prev_is_type = (
            (prev.kind is TokenKind.IDENTIFIER)
            or (prev.kind is TokenKind.KEYWORD and prev.text in TYPE_KEYWORDS)
            or prev.text == "]"
            or (prev.text == ">" and _is_generic_close(tokens, i - 1))
        )
        if prev_is_type:
            add(tok.text)
            # multi-declarator tail: `int a = 1, b = 2;`
            j = i + 1
            depth = 0
            while j < len(tokens) and not (tokens[j].text == ";" and depth == 0):
                t = tokens[j]
                if t.text in "([":
                    depth += 1
                elif t.text in ")]":
                    depth -= 1
                    if depth < 0:
                        break
                elif (
                    depth == 0
                    and t.text == ","
                    and j + 1 < len(tokens)
                    and tokens[j + 1].kind is TokenKind.IDENTIFIER
                    and j + 2 < len(tokens)
                    and tokens[j + 2].text in {"=", ",", ";"}
                ):
                    add(tokens[j + 1].text)
                j += 1

    # untyped lambda params: `x -> ...` and `(a, b) -> ...`
    for i, tok in enumerate(tokens):
        if tok.text != "->" or i == 0:
            continue
        prev = tokens[i - 1]
        if prev.kind is TokenKind.IDENTIFIER:
            add(prev.text)
        elif prev.text == ")":
            params: list[str] = []
            depth = 1
            j = i - 2
            while j >= 0 and depth > 0:
                if tokens[j].text == ")":
                    depth += 1
                elif tokens[j].text == "(":
                    depth -= 1
                elif (
                    j >= 1
                    and tokens[j].kind is TokenKind.IDENTIFIER
                    and tokens[j - 1].text in {"(", ","}
                    and tokens[j + 1].text in {",", ")"}
                ):
                    params.append(tokens[j].text)
                j -= 1
            for name in reversed(params):
                add(name)
    return declared


def _fresh_name(rng: random.Random, wordlist: tuple[str, ...], taken: set[str]) -> str:
    for _ in range(64):
        word = rng.choice(wordlist)
        if word not in taken and word not in JAVA_KEYWORDS:
            return word
        second = rng.choice(wordlist)
        combo = word + second.capitalize()
        if combo not in taken and combo not in JAVA_KEYWORDS:
            return combo
    raise InternalError("could not generate a fresh identifier from the wordlist")


def _mutate_number(rng: random.Random, text: str) -> str:
    lower = text.lower()
    if lower.startswith("0x"):
        pool = "0123456789abcdef"
        body = []
        for c in text[2:]:
            if c.lower() in pool and c != "_":
                pick = rng.choice(pool)
                body.append(pick.upper() if c.isupper() else pick)
            else:
                body.append(c)
        return text[:2] + "".join(body)
    if lower.startswith("0b"):
        return text[:2] + "".join(rng.choice("01") if c in "01" else c for c in text[2:])
    chars = list(text)
    digit_positions = [k for k, c in enumerate(chars) if c.isdigit()]
    for pos in digit_positions:
        chars[pos] = rng.choice("0123456789")
    # avoid creating a leading zero on a multi-digit integer part
    if digit_positions and digit_positions[0] == 0 and len(digit_positions) > 1 and chars[0] == "0":
        chars[0] = rng.choice("123456789")
    return "".join(chars)


def _mutate_string(rng: random.Random, wordlist: tuple[str, ...]) -> str:
    words = [rng.choice(wordlist) for _ in range(rng.randint(1, 2))]
    return '"' + " ".join(words) + '"'


def augment_test(test: FlakyTest, config: AugmentationConfig, copy_index: int) -> FlakyTest:
    """Produce one mutated copy of an original test.

    Deterministic given (config.seed, test.id, copy_index). The copy carries
    augmented_from lineage and a derived id.
    """
    if test.augmented_from is not None:
        raise DataError(f"cannot augment {test.id!r}: it is itself augmented")
    rng = _derived_rng(config.seed, test.id, copy_index)
    tokens = tokenize(test.code)

    declared = _declared_names(tokens)
    all_identifiers = {t.text for t in tokens if t.kind is TokenKind.IDENTIFIER}
    taken = set(all_identifiers)
    renames: dict[str, str] = {}
    for name in declared:
        fresh = _fresh_name(rng, config.wordlist, taken)
        renames[name] = fresh
        taken.add(fresh)

    replacements: list[tuple[tuple[int, int], str]] = []
    for i, tok in enumerate(tokens):
        prev = tokens[i - 1] if i > 0 else None
        if tok.kind is TokenKind.IDENTIFIER and tok.text in renames:
            if prev is not None and prev.text == ".":
                continue  # qualified access refers to a different symbol
            replacements.append((tok.span, renames[tok.text]))
        elif tok.kind is TokenKind.NUMBER_LIT:
            replacements.append((tok.span, _mutate_number(rng, tok.text)))
        elif tok.kind is TokenKind.STRING_LIT and tok.text.endswith('"') and len(tok.text) >= 2:
            replacements.append((tok.span, _mutate_string(rng, config.wordlist)))
        elif tok.kind is TokenKind.BOOL_LIT:
            flipped = "false" if tok.text == "true" else "true"
            replacements.append((tok.span, rng.choice([tok.text, flipped])))

    if not replacements:
        log.warning("test %s has no mutable elements; augmented copy is identical", test.id)

    code = test.code
    for (start, end), new_text in sorted(replacements, key=lambda r: r[0][0], reverse=True):
        code = code[:start] + new_text + code[end:]

    return replace(
        test,
        id=f"{test.id}__aug{copy_index}",
        code=code,
        augmented_from=test.id,
    )


def augment_corpus(
    tests: list[FlakyTest],
    config: AugmentationConfig,
    targets: dict[Category, int] | None = None,
) -> list[FlakyTest]:
    """Originals followed by augmented copies.

    Without targets every original receives config.copies_per_test copies.
    With targets, per-category copy counts are balanced so each category
    reaches exactly its configured total size (originals included).
    """
    for test in tests:
        if test.augmented_from is not None:
            raise DataError(f"augment_corpus expects originals only, got augmented {test.id!r}")

    copy_counts: dict[str, int] = {}
    if targets is None:
        for test in tests:
            copy_counts[test.id] = config.copies_per_test
    else:
        by_category: dict[Category, list[FlakyTest]] = {}
        for test in tests:
            by_category.setdefault(test.category, []).append(test)
        for category, members in by_category.items():
            if category not in targets:
                for t in members:
                    copy_counts[t.id] = 0
                continue
            total = targets[category]
            n_copies = total - len(members)
            if n_copies < 0:
                raise DataError(
                    f"target {total} for {category.value} is below the {len(members)} originals"
                )
            base, remainder = divmod(n_copies, len(members))
            order = list(range(len(members)))
            _derived_rng(config.seed, "targets", category.value).shuffle(order)
            extra = set(order[:remainder])
            for idx, t in enumerate(members):
                copy_counts[t.id] = base + (1 if idx in extra else 0)

    out = list(tests)
    seen_ids = {t.id for t in tests}
    for test in tests:
        for copy_index in range(copy_counts[test.id]):
            aug = augment_test(test, config, copy_index)
            if aug.id in seen_ids:
                raise InternalError(f"duplicate generated id {aug.id!r}")
            seen_ids.add(aug.id)
            out.append(aug)
    return out
