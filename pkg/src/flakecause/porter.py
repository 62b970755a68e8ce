"""Porter stemming algorithm (1980), as used for vocabulary preprocessing.

Implements the original five-step suffix-stripping procedure. Within a step
the longest matching suffix wins and its condition is then tested; no
fallback to shorter suffixes.
"""
from __future__ import annotations

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant sequences: [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_consonant(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _longest_rule(word: str, rules) -> tuple[str, str] | None:
    best = None
    for suffix, repl in rules:
        if word.endswith(suffix) and (best is None or len(suffix) > len(best[0])):
            best = (suffix, repl)
    return best


_STEP2_RULES = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]

_STEP3_RULES = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_STEP4_SUFFIXES = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def stem(word: str) -> str:
    """Stem a single lowercase word."""
    if len(word) <= 2:
        return word
    word = _step1a(word)
    word = _step1b(word)
    word = _step1c(word)
    word = _step2(word)
    word = _step3(word)
    word = _step4(word)
    word = _step5(word)
    return word


def _step1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ies"):
        return word[:-2]
    if word.endswith("ss"):
        return word
    if word.endswith("s"):
        return word[:-1]
    return word


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            return word[:-1]
        return word
    cleaned = None
    if word.endswith("ed") and _contains_vowel(word[:-2]):
        cleaned = word[:-2]
    elif word.endswith("ing") and _contains_vowel(word[:-3]):
        cleaned = word[:-3]
    if cleaned is None:
        return word
    if cleaned.endswith(("at", "bl", "iz")):
        return cleaned + "e"
    if _ends_double_consonant(cleaned) and not cleaned.endswith(("l", "s", "z")):
        return cleaned[:-1]
    if _measure(cleaned) == 1 and _ends_cvc(cleaned):
        return cleaned + "e"
    return cleaned


def _step1c(word: str) -> str:
    if word.endswith("y") and _contains_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


def _step2(word: str) -> str:
    hit = _longest_rule(word, _STEP2_RULES)
    if hit is not None:
        suffix, repl = hit
        if _measure(word[: -len(suffix)]) > 0:
            return word[: -len(suffix)] + repl
    return word


def _step3(word: str) -> str:
    hit = _longest_rule(word, _STEP3_RULES)
    if hit is not None:
        suffix, repl = hit
        if _measure(word[: -len(suffix)]) > 0:
            return word[: -len(suffix)] + repl
    return word


def _step4(word: str) -> str:
    hit = _longest_rule(word, [(s, "") for s in _STEP4_SUFFIXES])
    if hit is None:
        return word
    suffix, _ = hit
    stem_part = word[: -len(suffix)]
    if _measure(stem_part) <= 1:
        return word
    if suffix == "ion" and not stem_part.endswith(("s", "t")):
        return word
    return stem_part


def _step5(word: str) -> str:
    if word.endswith("e"):
        stem_part = word[:-1]
        m = _measure(stem_part)
        if m > 1 or (m == 1 and not _ends_cvc(stem_part)):
            word = stem_part
    if word.endswith("ll") and _measure(word[:-1]) > 1:
        word = word[:-1]
    return word
