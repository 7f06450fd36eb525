"""Attribute changed lines to declared code entities or proximity blocks.

Entity detection is line-oriented: C and Java use a signature pattern plus
brace balance on comment- and string-stripped text, Python uses indentation
scope. Nested structures are flattened so that spans never overlap: lines of
a class outside its methods stay attributed to the class.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from .gitio import FileDiff

FUNCTION = "function"
CLASS_LIKE = "class_like"
FILE_FALLBACK = "file_fallback"

SUMMARISE = "summarise_per_entity"
DISTINCT = "distinct_blocks"
COUNTING_MODES = (SUMMARISE, DISTINCT)

FILE_ENTITY = "<file>"

ENTITY_CHANGES_HEADER = ("hash", "path", "entity", "dev_id", "lines", "block_index", "mode")

LANGUAGES = {
    ".c": "C", ".h": "C", ".cc": "C", ".cpp": "C", ".cxx": "C", ".hpp": "C", ".hh": "C",
    ".java": "Java",
    ".py": "Python",
}


def language_of(path: str) -> Optional[str]:
    dot = path.rfind(".")
    if dot < 0 or "/" in path[dot:]:
        return None
    return LANGUAGES.get(path[dot:].lower())


@dataclass(frozen=True)
class EntitySpan:
    path: str
    kind: str
    name: str
    start_line: int
    end_line: int

    def __post_init__(self):
        if self.start_line > self.end_line:
            raise ValueError(f"span {self.name} starts after it ends")


@dataclass(frozen=True)
class EntityChange:
    commit: str
    path: str
    entity_name: str
    dev: str
    lines_changed: int
    block_index: Optional[int]
    counting_mode: str

    def __post_init__(self):
        if self.lines_changed < 1:
            raise ValueError("lines_changed must be positive")
        if (self.block_index is not None) != (self.counting_mode == DISTINCT):
            raise ValueError("block_index is required exactly in distinct_blocks mode")

    def row(self) -> tuple:
        return (self.commit, self.path, self.entity_name, self.dev, self.lines_changed,
                "" if self.block_index is None else self.block_index, self.counting_mode)


def detect_blocks_proximity(changed_lines: Sequence[int], gap: int = 0) -> list[tuple[int, int]]:
    """Maximal runs of sorted lines whose neighbours differ by at most gap+1."""
    if gap < 0:
        raise ValueError("gap must be non-negative")
    blocks: list[tuple[int, int]] = []
    for line in changed_lines:
        if blocks and line - blocks[-1][1] <= gap + 1:
            blocks[-1] = (blocks[-1][0], line)
        else:
            blocks.append((line, line))
    return blocks


# -- declared-structure detection ---------------------------------------------

_CONTROL = frozenset("if for while switch catch return sizeof synchronized do else try "
                     "new foreach using lock defined alignof typeof".split())
_FUNC_SIG = re.compile(
    r"(?:^|[\s*&:>~])(~?[A-Za-z_]\w*)\s*\((?:[^()]|\([^()]*\))*\)\s*"
    r"(?:const\s*)?(?:noexcept\s*)?(?:override\s*)?(?:final\s*)?"
    r"(?:throws\s+[\w\s,.<>]+)?(?::[^{;]*)?$")
_CLASS_SIG = re.compile(r"\b(class|struct|interface|enum|union|record|namespace)\s+([A-Za-z_]\w*)")
_NEW_EXPR = re.compile(r"\bnew\s+[\w.<>]+\s*\([^;]*\)\s*$")


def _strip_c_like(text: str) -> str:
    """Blank out comments, string/char literals and preprocessor lines, keeping newlines."""
    out = []
    i, n = 0, len(text)
    at_line_start = True
    while i < n:
        c = text[i]
        if at_line_start and c == "#":
            j = i
            while j < n and text[j] != "\n":
                if text[j] == "\\" and j + 1 < n and text[j + 1] == "\n":
                    out.append(" \n")
                    j += 2
                    continue
                out.append(" ")
                j += 1
            i = j
            continue
        if c == "\n":
            at_line_start = True
            out.append(c)
            i += 1
            continue
        if not c.isspace():
            at_line_start = False
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            out.append(" " * (j - i))
            i = j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            out.append("".join("\n" if ch == "\n" else " " for ch in text[i:j]))
            i = j
        elif c in "\"'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            j = min(j + 1, n)
            out.append(c + "".join("\n" if ch == "\n" else " " for ch in text[i + 1:j - 1])
                       + (c if j - 1 > i else ""))
            i = j
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _nested_spans_c_like(text: str, path: str) -> list[EntitySpan]:
    clean = _strip_c_like(text)
    spans: list[EntitySpan] = []
    stack: list[Optional[tuple[str, str, int]]] = []
    stmt: list[str] = []
    stmt_line = None
    line = 1
    for c in clean:
        if c == "{":
            sig = " ".join("".join(stmt).split())
            stack.append(_classify_signature(sig, stmt_line or line))
            stmt, stmt_line = [], None
        elif c == "}":
            if stack:
                info = stack.pop()
                if info is not None:
                    kind, name, start = info
                    spans.append(EntitySpan(path, kind, name, start, line))
            stmt, stmt_line = [], None
        elif c == ";":
            stmt, stmt_line = [], None
        else:
            if stmt_line is None and not c.isspace():
                stmt_line = line
            if stmt_line is not None:
                stmt.append(c)
        if c == "\n":
            line += 1
    return spans


def _classify_signature(sig: str, start: int) -> Optional[tuple[str, str, int]]:
    if not sig:
        return None
    m = _FUNC_SIG.search(sig)
    if m and m.group(1) not in _CONTROL and not _NEW_EXPR.search(sig) and "=" not in sig[:m.start(1)]:
        return (FUNCTION, m.group(1), start)
    m = _CLASS_SIG.search(sig)
    if m and "(" not in sig[m.end():] and "=" not in sig:
        return (CLASS_LIKE, m.group(2), start)
    return None


_PY_DEF = re.compile(r"^([ \t]*)(?:async\s+)?(def|class)\s+([A-Za-z_]\w*)")


def _nested_spans_python(text: str, path: str) -> list[EntitySpan]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    indents: list[Optional[int]] = []
    for ln in lines:
        stripped = ln.strip()
        if not stripped or stripped.startswith("#"):
            indents.append(None)
        else:
            indents.append(len(ln) - len(ln.lstrip(" \t")))
    spans = []
    for i, ln in enumerate(lines):
        m = _PY_DEF.match(ln)
        if not m:
            continue
        indent = indents[i]
        last = i
        for j in range(i + 1, len(lines)):
            if indents[j] is None:
                continue
            if indents[j] <= indent:
                break
            last = j
        kind = FUNCTION if m.group(2) == "def" else CLASS_LIKE
        spans.append(EntitySpan(path, kind, m.group(3), i + 1, last + 1))
    return spans


def nested_entities(file_text: str, language: Optional[str], path: str = "") -> list[EntitySpan]:
    """Declared structures before flattening; may nest. Empty for unsupported languages."""
    if language in ("C", "Java"):
        return _nested_spans_c_like(file_text, path)
    if language == "Python":
        return _nested_spans_python(file_text, path)
    return []


def count_declared(file_text: str, language: Optional[str], kind: str = FUNCTION) -> int:
    return sum(1 for s in nested_entities(file_text, language) if s.kind == kind)


def _flatten(spans: list[EntitySpan], n_lines: int, path: str) -> list[EntitySpan]:
    if not spans:
        return []
    top = max(n_lines, max(s.end_line for s in spans))
    owner: list[Optional[int]] = [None] * (top + 1)
    order = sorted(range(len(spans)),
                   key=lambda k: (-(spans[k].end_line - spans[k].start_line), spans[k].start_line, k))
    for k in order:
        s = spans[k]
        owner[s.start_line:s.end_line + 1] = [k] * (s.end_line - s.start_line + 1)
    out = []
    run_start = None
    for ln in range(1, top + 2):
        cur = owner[ln] if ln <= top else None
        prev = owner[ln - 1] if ln > 1 else None
        if run_start is not None and cur != prev:
            s = spans[prev]
            out.append(EntitySpan(path, s.kind, s.name, run_start, ln - 1))
            run_start = None
        if cur is not None and run_start is None:
            run_start = ln
    return out


def detect_entities_declared(file_text: str, language: Optional[str], path: str = "") -> list[EntitySpan]:
    """Non-overlapping named spans; a single file-level span for unsupported languages."""
    n_lines = file_text.count("\n") + (0 if file_text.endswith("\n") or not file_text else 1)
    if language not in ("C", "Java", "Python"):
        return [EntitySpan(path, FILE_FALLBACK, FILE_ENTITY, 1, max(n_lines, 1))]
    return _flatten(nested_entities(file_text, language, path), n_lines, path)


def decode_lossy(data: bytes) -> tuple[str, bool]:
    try:
        return data.decode("utf-8"), False
    except UnicodeDecodeError:
        return data.decode("utf-8", "replace"), True


# -- change attribution -------------------------------------------------------

def _entity_at(spans: Sequence[EntitySpan], starts: list[int], line: int) -> Optional[str]:
    k = bisect.bisect_right(starts, line) - 1
    if k >= 0 and spans[k].start_line <= line <= spans[k].end_line:
        return spans[k].name
    return None


def map_changes_to_entities(changed_lines: Union[Iterable[int], Mapping[int, int]],
                            spans: Sequence[EntitySpan], counting_mode: str = SUMMARISE,
                            gap: int = 0, fallback: bool = True, commit: str = "",
                            path: str = "", dev: str = "", block_offset: int = 0
                            ) -> list[EntityChange]:
    """Turn a changed-line set of one file revision into entity change records.

    ``changed_lines`` may map each line to a weight (lines it stands for);
    lines outside every span go to the file-level entity when ``fallback``
    is on and are dropped otherwise.
    """
    if counting_mode not in COUNTING_MODES:
        raise ValueError(f"unknown counting mode {counting_mode!r}")
    weights = dict(changed_lines) if isinstance(changed_lines, Mapping) else {ln: 1 for ln in changed_lines}
    spans = sorted(spans, key=lambda s: s.start_line)
    starts = [s.start_line for s in spans]

    def entity(line: int) -> Optional[str]:
        name = _entity_at(spans, starts, line)
        if name is None and fallback:
            return FILE_ENTITY
        return name

    out: list[EntityChange] = []
    lines = sorted(weights)
    if counting_mode == SUMMARISE:
        totals: dict[str, int] = {}
        first_seen: dict[str, int] = {}
        for ln in lines:
            name = entity(ln)
            if name is None:
                continue
            totals[name] = totals.get(name, 0) + weights[ln]
            first_seen.setdefault(name, ln)
        for name in sorted(totals, key=lambda nm: first_seen[nm]):
            if totals[name] > 0:
                out.append(EntityChange(commit, path, name, dev, totals[name], None, SUMMARISE))
        return out
    for b, (lo, hi) in enumerate(detect_blocks_proximity(lines, gap)):
        per_entity: dict[str, int] = {}
        for ln in lines[bisect.bisect_left(lines, lo):bisect.bisect_right(lines, hi)]:
            name = entity(ln)
            if name is not None:
                per_entity[name] = per_entity.get(name, 0) + weights[ln]
        for name, total in per_entity.items():
            if total > 0:
                out.append(EntityChange(commit, path, name, dev, total, block_offset + b, DISTINCT))
    return out


def changed_line_weights(diff: FileDiff) -> tuple[dict[int, int], dict[int, int]]:
    """Split a file diff into post-image and pre-image line weights.

    Hunks with added lines are placed on the post-image; their deleted
    lines are folded onto the added lines in order, the surplus onto the
    last one. Deletion-only hunks are placed on the pre-image. Total weight
    equals added plus deleted lines.
    """
    post: dict[int, int] = {}
    pre: dict[int, int] = {}
    for h in diff.hunks:
        if h.new_count > 0:
            new = list(h.new_lines)
            for k, ln in enumerate(new):
                post[ln] = post.get(ln, 0) + 1 + (1 if k < h.old_count else 0)
            surplus = h.old_count - len(new)
            if surplus > 0:
                post[new[-1]] += surplus
        else:
            for ln in h.old_lines:
                pre[ln] = pre.get(ln, 0) + 1
    return post, pre


def entity_changes_for_diff(diff: FileDiff, post_spans: Sequence[EntitySpan],
                            pre_spans: Sequence[EntitySpan], counting_mode: str,
                            gap: int = 0, fallback: bool = True, commit: str = "",
                            dev: str = "") -> list[EntityChange]:
    post, pre = changed_line_weights(diff)
    out = map_changes_to_entities(post, post_spans, counting_mode, gap, fallback,
                                  commit, diff.path, dev)
    offset = 1 + max((c.block_index for c in out if c.block_index is not None), default=-1)
    out += map_changes_to_entities(pre, pre_spans, counting_mode, gap, fallback,
                                   commit, diff.path, dev, block_offset=offset)
    if counting_mode == SUMMARISE:
        merged: dict[str, int] = {}
        for c in out:
            merged[c.entity_name] = merged.get(c.entity_name, 0) + c.lines_changed
        out = [EntityChange(commit, diff.path, nm, dev, v, None, SUMMARISE) for nm, v in merged.items()]
    return out
