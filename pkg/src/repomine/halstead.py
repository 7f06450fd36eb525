"""Operator/operand lexer and Halstead effort."""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Iterable, Optional

OPERATOR = "operator"
OPERAND = "operand"

_C_KEYWORDS = """auto break case char const continue default do double else enum extern
float for goto if inline int long register restrict return short signed sizeof static
struct switch typedef union unsigned void volatile while bool class namespace template
typename public private protected virtual new delete this throw try catch operator""".split()

_JAVA_KEYWORDS = """abstract assert boolean break byte case catch char class const continue
default do double else enum extends final finally float for goto if implements import
instanceof int interface long native new package private protected public return short
static strictfp super switch synchronized this throw throws transient try void volatile
while var record""".split()

_PYTHON_KEYWORDS = """False None True and as assert async await break class continue def
del elif else except finally for from global if import in is lambda nonlocal not or pass
raise return try while with yield""".split()

KEYWORDS = {
    "C": frozenset(_C_KEYWORDS),
    "Java": frozenset(_JAVA_KEYWORDS),
    "Python": frozenset(_PYTHON_KEYWORDS),
}
# literal-valued keywords count as operands
_LITERAL_WORDS = frozenset({"true", "false", "null", "NULL", "None", "True", "False", "nullptr"})

_TOKEN = re.compile(r"""
    (?P<comment>//[^\n]*|/\*.*?\*/|\#[^\n]*)
  | (?P<string>"(?:\\.|[^"\\\n])*"?|'(?:\\.|[^'\\\n])*'?)
  | (?P<number>\b\d[\w.]*|\.\d[\w]*)
  | (?P<ident>[A-Za-z_$][\w$]*)
  | (?P<op>>>>=|<<=|>>=|\*\*=|//=|->|::|\+\+|--|&&|\|\||<<|>>|<=|>=|==|!=|\+=|-=|\*=|/=|%=|&=|\|=|\^=|\*\*|//|[-+*/%=<>!&|^~?:.,;@\[({])
  | (?P<close>[\])}])
  | (?P<ws>\s+)
""", re.VERBOSE | re.DOTALL)


def tokenize(text: str, language: Optional[str] = None) -> list[tuple[str, str]]:
    """Tag tokens as operators or operands.

    Keywords and punctuation are operators, identifiers and literals are
    operands. Closing brackets are skipped so a bracket pair counts once.
    Comments are dropped; for Python ``#`` starts a comment, elsewhere a
    leading ``#`` line is treated as a preprocessor directive and dropped too.
    """
    keywords = KEYWORDS.get(language, KEYWORDS["C"])
    out: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            out.append((OPERATOR, text[pos]))
            pos += 1
            continue
        pos = m.end()
        kind = m.lastgroup
        value = m.group()
        if kind in ("comment", "ws", "close"):
            continue
        if kind == "ident":
            if value in _LITERAL_WORDS or value not in keywords:
                out.append((OPERAND, value))
            else:
                out.append((OPERATOR, value))
        elif kind in ("string", "number"):
            out.append((OPERAND, value))
        else:
            out.append((OPERATOR, value))
    return out


def halstead_counts(tokens: Iterable[tuple[str, str]]) -> tuple[int, int, int, int]:
    """(distinct operators, distinct operands, total operators, total operands)."""
    ops: Counter = Counter()
    opnds: Counter = Counter()
    for kind, value in tokens:
        (ops if kind == OPERATOR else opnds)[value] += 1
    return len(ops), len(opnds), sum(ops.values()), sum(opnds.values())


def halstead_effort(tokens: Iterable[tuple[str, str]]) -> float:
    eta1, eta2, n1, n2 = halstead_counts(tokens)
    eta = eta1 + eta2
    if eta <= 1 or eta2 == 0:
        return 0.0
    volume = (n1 + n2) * math.log2(eta)
    difficulty = (eta1 / 2.0) * (n2 / eta2)
    return volume * difficulty


def effort_of_lines(lines: Iterable[str], language: Optional[str] = None) -> float:
    return halstead_effort(tokenize("\n".join(lines), language))
