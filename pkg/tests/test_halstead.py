from __future__ import annotations

import math

import pytest

from repomine.halstead import (OPERAND, OPERATOR, effort_of_lines, halstead_counts, halstead_effort,
                               tokenize)


def test_hand_example():
    # operators {=, +} N1=2; operands {a, b, 1} N2=4
    tokens = [(OPERAND, "a"), (OPERATOR, "="), (OPERAND, "b"), (OPERATOR, "+"), (OPERAND, "1"),
              (OPERAND, "a")]
    assert halstead_counts(tokens) == (2, 3, 2, 4)
    v = 6 * math.log2(5)
    d = (2 / 2) * (4 / 3)
    assert halstead_effort(tokens) == pytest.approx(v * d, rel=1e-12)
    assert halstead_effort(tokens) == pytest.approx(18.58, abs=0.01)


def test_degenerate():
    assert halstead_effort([]) == 0
    assert halstead_effort([(OPERAND, "x")]) == 0
    assert effort_of_lines([]) == 0


def test_tokenizer_c():
    toks = tokenize("x = a + 1; /* c */ // tail\nif (x) { return; }", "C")
    ops = [v for k, v in toks if k == OPERATOR]
    operands = [v for k, v in toks if k == OPERAND]
    assert operands == ["x", "a", "1", "x"]
    assert "if" in ops and "return" in ops and "c" not in operands


def test_permutation_invariant():
    lines = ["int a = b * 2;", "call(a, b);", "return a;"]
    assert effort_of_lines(lines, "C") == pytest.approx(effort_of_lines(list(reversed(lines)), "C"))
