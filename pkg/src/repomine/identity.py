"""Merge raw (name, email) aliases into canonical developers."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

AUTHOR_ONLY = "author_only"
AUTHOR_AND_COMMITTER = "author_and_committer"
SCOPES = (AUTHOR_ONLY, AUTHOR_AND_COMMITTER)

EXACT = "exact"
EDIT_DISTANCE = "edit_distance"
IDENTITY_MODES = (EXACT, EDIT_DISTANCE)

IDENTITIES_HEADER = ("dev_id", "display_name", "raw_name", "raw_email")

RawIdentity = tuple[str, str]

_WS = re.compile(r"\s+")
_COMMENT = re.compile(r"\([^)]*\)")


def normalize_name(name: str) -> str:
    return _WS.sub(" ", name.casefold()).strip()


def normalize_email(email: str) -> str:
    email = _COMMENT.sub("", email).strip().strip("<>").strip()
    return email.casefold()


def email_local_part(email: str) -> str:
    return normalize_email(email).split("@", 1)[0]


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


@dataclass(frozen=True)
class CanonicalDeveloper:
    id: str
    display_name: str
    members: frozenset

    @classmethod
    def from_members(cls, members: Iterable[RawIdentity]) -> "CanonicalDeveloper":
        members = frozenset(members)
        digest = hashlib.sha1()
        for name, email in sorted(members):
            digest.update(f"{name}\x00{email}\x01".encode())
        display = min(normalize_name(n) for n, _ in members)
        return cls("d" + digest.hexdigest()[:10], display, members)


class Partition:
    """A set of canonical developers covering a raw identity universe."""

    def __init__(self, developers: Iterable[CanonicalDeveloper], mode: str = EXACT,
                 threshold: int | None = None, scope: str = AUTHOR_ONLY):
        self.developers = sorted(developers, key=lambda d: d.id)
        self.mode = mode
        self.threshold = threshold
        self.scope = scope
        self._lookup = {m: d for d in self.developers for m in d.members}

    def __len__(self) -> int:
        return len(self.developers)

    def __iter__(self) -> Iterator[CanonicalDeveloper]:
        return iter(self.developers)

    def __contains__(self, raw: RawIdentity) -> bool:
        return raw in self._lookup

    def dev_of(self, raw: RawIdentity) -> CanonicalDeveloper:
        return self._lookup[raw]

    def id_of(self, raw: RawIdentity) -> str:
        return self._lookup[raw].id

    def get_id(self, raw: RawIdentity, default=None):
        dev = self._lookup.get(raw)
        return dev.id if dev is not None else default

    def display_names(self) -> dict[str, str]:
        return {d.id: d.display_name for d in self.developers}

    def blocks(self) -> set[frozenset]:
        return {d.members for d in self.developers}

    def rows(self) -> list[tuple]:
        return [(d.id, d.display_name, n, e) for d in self.developers for n, e in sorted(d.members)]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def collect_identities(source: Iterable, scope: str = AUTHOR_ONLY) -> list[RawIdentity]:
    """Raw identity universe from commit records or plain pairs."""
    if scope not in SCOPES:
        raise ValueError(f"unknown identity scope {scope!r}")
    out: set[RawIdentity] = set()
    for item in source:
        if isinstance(item, tuple):
            out.add((item[0].strip(), item[1].strip()))
            continue
        out.add((item.author_name.strip(), item.author_email.strip()))
        if scope == AUTHOR_AND_COMMITTER:
            out.add((item.committer_name.strip(), item.committer_email.strip()))
    return sorted(out)


def _partition(idents: list[RawIdentity], uf: _UnionFind, **meta) -> Partition:
    groups: dict[int, list[RawIdentity]] = {}
    for i, ident in enumerate(idents):
        groups.setdefault(uf.find(i), []).append(ident)
    return Partition((CanonicalDeveloper.from_members(g) for g in groups.values()), **meta)


def canonicalize_exact(identities: Iterable[Union[RawIdentity, object]],
                       scope: str = AUTHOR_ONLY) -> Partition:
    """Merge on equal normalized name, equal email, or equal email local part."""
    idents = collect_identities(identities, scope)
    uf = _UnionFind(len(idents))
    seen: dict[tuple[str, str], int] = {}
    for i, (name, email) in enumerate(idents):
        keys = [("n", normalize_name(name)), ("e", normalize_email(email)),
                ("l", email_local_part(email))]
        for key in keys:
            if not key[1]:
                continue
            if key in seen:
                uf.union(seen[key], i)
            else:
                seen[key] = i
    return _partition(idents, uf, mode=EXACT, scope=scope)


def canonicalize_edit_distance(identities: Iterable, threshold: int,
                               scope: str = AUTHOR_ONLY) -> Partition:
    """Merge when names or email local parts are within ``threshold`` edits."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    idents = collect_identities(identities, scope)
    names = [normalize_name(n) for n, _ in idents]
    locals_ = [email_local_part(e) for _, e in idents]
    uf = _UnionFind(len(idents))
    for i in range(len(idents)):
        for j in range(i + 1, len(idents)):
            if uf.find(i) == uf.find(j):
                continue
            if _close(names[i], names[j], threshold) or _close(locals_[i], locals_[j], threshold):
                uf.union(i, j)
    return _partition(idents, uf, mode=EDIT_DISTANCE, threshold=threshold, scope=scope)


def _close(a: str, b: str, threshold: int) -> bool:
    if not a or not b:
        return False
    if abs(len(a) - len(b)) > threshold:
        return False
    return levenshtein(a, b) <= threshold


def resolve(commits: Iterable, mode: str = EXACT, threshold: int = 0,
            scope: str = AUTHOR_ONLY, extra: Iterable[RawIdentity] = ()) -> Partition:
    """Partition for a commit table plus any extra raw pairs (e.g. blame owners)."""
    if mode not in IDENTITY_MODES:
        raise ValueError(f"unknown identity mode {mode!r}")
    universe = collect_identities(commits, scope) + collect_identities(extra)
    if mode == EXACT:
        return canonicalize_exact(universe, scope=scope)
    return canonicalize_edit_distance(universe, threshold, scope=scope)
