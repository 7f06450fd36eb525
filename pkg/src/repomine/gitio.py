"""Run git on a local repository and parse its output into fact tables.

Every git call goes through :class:`Repository`, which pins the flag sets
used for log, numstat, diff and blame so two extractions of an unchanged
repository produce identical tables.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

GIT_ENV_VAR = "REPOMINE_GIT"
EMPTY_TREE = "4b825dc642cb6eb9a060e54bf8d69288fbee4904"

SINGLE_BRANCH = "single_branch"
ALL_BRANCHES = "all_branches"
BRANCH_MODES = (SINGLE_BRANCH, ALL_BRANCHES)

FILTER_BEFORE_STORE = "before_store"
FILTER_AT_ANALYSIS = "at_analysis"
FILTER_ORDERS = (FILTER_BEFORE_STORE, FILTER_AT_ANALYSIS)

_FS = "\x1f"
_RS = "\x1e"
_LOG_FORMAT = "%x1e%H%x1f%an%x1f%ae%x1f%cn%x1f%ce%x1f%ad%x1f%cd%x1f%P"

COMMITS_HEADER = ("hash", "author_name", "author_email", "committer_name",
                  "committer_email", "author_time", "commit_time", "parents")
FILE_CHANGES_HEADER = ("hash", "path", "old_path", "added", "deleted", "binary")


class GitError(Exception):
    """Base class for failures while talking to git."""


class GitNotFoundError(GitError):
    pass


class NotARepositoryError(GitError):
    pass


class UnknownBranchError(GitError):
    pass


class PathNotFoundError(GitError):
    pass


class NumstatParseError(GitError):
    def __init__(self, raw: str):
        super().__init__(f"cannot parse numstat line: {raw!r}")
        self.raw = raw


@dataclass(frozen=True)
class CommitRecord:
    hash: str
    author_name: str
    author_email: str
    committer_name: str
    committer_email: str
    author_time: int
    commit_time: int
    parents: tuple[str, ...]
    branch_scope: str = ALL_BRANCHES

    @property
    def is_merge(self) -> bool:
        return len(self.parents) > 1

    @property
    def author(self) -> tuple[str, str]:
        return (self.author_name, self.author_email)

    @property
    def committer(self) -> tuple[str, str]:
        return (self.committer_name, self.committer_email)

    def row(self) -> tuple:
        return (self.hash, self.author_name, self.author_email, self.committer_name,
                self.committer_email, self.author_time, self.commit_time,
                " ".join(self.parents))


@dataclass(frozen=True)
class FileChange:
    commit: str
    path: str
    old_path: Optional[str]
    lines_added: Optional[int]
    lines_deleted: Optional[int]
    is_binary: bool = False

    def __post_init__(self):
        if not self.path:
            raise ValueError("FileChange.path must be non-empty")
        unknown = self.lines_added is None or self.lines_deleted is None
        if unknown != self.is_binary:
            raise ValueError("unknown line counts must coincide with is_binary")

    @property
    def churn(self) -> int:
        # binary rows count as zero churn
        if self.is_binary:
            return 0
        return self.lines_added + self.lines_deleted

    def row(self) -> tuple:
        return (self.commit, self.path, self.old_path or "",
                "" if self.lines_added is None else self.lines_added,
                "" if self.lines_deleted is None else self.lines_deleted,
                int(self.is_binary))


@dataclass(frozen=True)
class LineAttribution:
    commit: str
    path: str
    line_no: int
    owner_commit: str
    owner_dev: tuple[str, str]


@dataclass(frozen=True)
class Hunk:
    """One ``-U0`` hunk. Counts of zero mean a pure insertion or deletion."""

    old_start: int
    old_count: int
    new_start: int
    new_count: int
    added_text: tuple[str, ...] = ()
    deleted_text: tuple[str, ...] = ()

    @property
    def old_lines(self) -> range:
        return range(self.old_start, self.old_start + self.old_count)

    @property
    def new_lines(self) -> range:
        return range(self.new_start, self.new_start + self.new_count)


@dataclass(frozen=True)
class FileDiff:
    path: str
    old_path: Optional[str]
    hunks: tuple[Hunk, ...] = ()
    is_binary: bool = False
    is_new: bool = False
    is_deleted: bool = False

    @property
    def pre_path(self) -> str:
        return self.old_path or self.path


@dataclass(frozen=True)
class FilterConfig:
    """File selection rules.

    ``allow_*`` rules keep a path if any of them match (no allow rules keeps
    everything); ``deny_*`` rules then drop any matching path. Patterns are
    regular expressions anchored at the start of the repo-relative path.
    """

    allow_patterns: tuple[str, ...] = ()
    deny_patterns: tuple[str, ...] = ()
    allow_extensions: tuple[str, ...] = ()
    deny_extensions: tuple[str, ...] = ()
    drop_binary: bool = False
    order: str = FILTER_BEFORE_STORE
    _compiled: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order not in FILTER_ORDERS:
            raise ValueError(f"unknown filter order {self.order!r}")
        try:
            allow = tuple(re.compile(p) for p in self.allow_patterns)
            deny = tuple(re.compile(p) for p in self.deny_patterns)
        except re.error as exc:
            raise ValueError(f"invalid filter pattern: {exc}") from exc
        for ext in self.allow_extensions + self.deny_extensions:
            if not ext:
                raise ValueError("empty extension literal")
        object.__setattr__(self, "_compiled", (allow, deny))

    @property
    def is_empty(self) -> bool:
        return not (self.allow_patterns or self.deny_patterns or self.allow_extensions
                    or self.deny_extensions or self.drop_binary)

    def allows(self, path: str) -> bool:
        allow, _ = self._compiled
        if not (allow or self.allow_extensions):
            return True
        return (any(p.match(path) for p in allow)
                or any(_has_ext(path, e) for e in self.allow_extensions))

    def denies(self, path: str, is_binary: bool = False) -> bool:
        _, deny = self._compiled
        if self.drop_binary and is_binary:
            return True
        return (any(p.match(path) for p in deny)
                or any(_has_ext(path, e) for e in self.deny_extensions))

    def keeps(self, change: FileChange) -> bool:
        return self.allows(change.path) and not self.denies(change.path, change.is_binary)

    def allow_only(self) -> "FilterConfig":
        return FilterConfig(allow_patterns=self.allow_patterns,
                            allow_extensions=self.allow_extensions, order=self.order)

    def deny_only(self) -> "FilterConfig":
        return FilterConfig(deny_patterns=self.deny_patterns,
                            deny_extensions=self.deny_extensions,
                            drop_binary=self.drop_binary, order=self.order)


def _has_ext(path: str, ext: str) -> bool:
    if not ext.startswith("."):
        ext = "." + ext
    return path.lower().endswith(ext.lower())


def apply_file_filters(changes: Iterable[FileChange], filters: Optional[FilterConfig]) -> list[FileChange]:
    if filters is None or filters.is_empty:
        return list(changes)
    return [c for c in changes if filters.keeps(c)]


def git_executable() -> str:
    override = os.environ.get(GIT_ENV_VAR)
    exe = override or shutil.which("git")
    if not exe or (override and not os.path.exists(override) and not shutil.which(override)):
        raise GitNotFoundError(f"git executable not found (set {GIT_ENV_VAR} to override)")
    return exe


def parse_numstat_line(line: str, commit: str = "") -> FileChange:
    parts = line.split("\t")
    if len(parts) != 3:
        raise NumstatParseError(line)
    added, deleted, raw_path = parts
    if added == "-" and deleted == "-":
        a = d = None
    else:
        try:
            a, d = int(added), int(deleted)
        except ValueError:
            raise NumstatParseError(line) from None
    path, old_path = split_rename(raw_path)
    if not path:
        raise NumstatParseError(line)
    return FileChange(commit, path, old_path, a, d, is_binary=a is None)


_BRACE_RENAME = re.compile(r"^(?P<pre>.*)\{(?P<old>.*) => (?P<new>.*)\}(?P<post>.*)$")


def split_rename(raw: str) -> tuple[str, Optional[str]]:
    """Split git's rename notation into ``(new_path, old_path)``."""
    if " => " not in raw:
        return raw, None
    m = _BRACE_RENAME.match(raw)
    if m:
        pre, post = m.group("pre"), m.group("post")
        old = (pre + m.group("old") + post).replace("//", "/")
        new = (pre + m.group("new") + post).replace("//", "/")
        return new, old
    old, new = raw.split(" => ", 1)
    return new, old


_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def parse_unified_diff(text: str) -> list[FileDiff]:
    """Parse ``git diff -U0`` output into per-file hunks."""
    files: list[FileDiff] = []
    cur: Optional[dict] = None
    hunk: Optional[dict] = None

    def close_hunk():
        nonlocal hunk
        if hunk is not None and cur is not None:
            cur["hunks"].append(Hunk(hunk["os"], hunk["oc"], hunk["ns"], hunk["nc"],
                                     tuple(hunk["add"]), tuple(hunk["del"])))
        hunk = None

    def close_file():
        nonlocal cur
        close_hunk()
        if cur is not None:
            path = cur["new"] or cur["old"] or cur["header"][1]
            old = cur["old"] or cur["header"][0]
            if cur["deleted"]:
                path = old
            old_path = old if (old and old != path and not cur["new_file"]) else None
            files.append(FileDiff(path, old_path, tuple(cur["hunks"]), cur["binary"],
                                  cur["new_file"], cur["deleted"]))
        cur = None

    for line in text.split("\n"):
        if line.startswith("diff --git "):
            close_file()
            cur = {"header": _split_diff_header(line[11:]), "old": None, "new": None,
                   "hunks": [], "binary": False, "new_file": False, "deleted": False}
            continue
        if cur is None:
            continue
        if hunk is not None:
            if line.startswith("+"):
                hunk["add"].append(line[1:])
                continue
            if line.startswith("-"):
                hunk["del"].append(line[1:])
                continue
            if line.startswith("\\"):
                continue
        m = _HUNK_RE.match(line)
        if m:
            close_hunk()
            oc = 1 if m.group(2) is None else int(m.group(2))
            nc = 1 if m.group(4) is None else int(m.group(4))
            hunk = {"os": int(m.group(1)), "oc": oc, "ns": int(m.group(3)), "nc": nc,
                    "add": [], "del": []}
            continue
        if line.startswith("--- "):
            cur["old"] = None if line[4:] == "/dev/null" else _strip_prefix(line[4:], "a/")
        elif line.startswith("+++ "):
            cur["new"] = None if line[4:] == "/dev/null" else _strip_prefix(line[4:], "b/")
        elif line.startswith("rename from "):
            cur["old"] = line[12:]
        elif line.startswith("rename to "):
            cur["new"] = line[10:]
        elif line.startswith("new file mode"):
            cur["new_file"] = True
        elif line.startswith("deleted file mode"):
            cur["deleted"] = True
        elif line.startswith("Binary files "):
            cur["binary"] = True
    close_file()
    return files


def _strip_prefix(s: str, prefix: str) -> str:
    s = s.rstrip("\t")
    return s[len(prefix):] if s.startswith(prefix) else s


def _split_diff_header(rest: str) -> tuple[str, str]:
    # "a/X b/Y"; unambiguous only when X == Y, which covers binary-only entries
    if rest.startswith("a/"):
        half = (len(rest) - 1) // 2
        a, b = rest[:half], rest[half + 1:]
        if b.startswith("b/") and a[2:] == b[2:]:
            return a[2:], b[2:]
    return "", ""


def parse_blame_porcelain(text: str, commit: str, path: str) -> list[LineAttribution]:
    """Parse ``git blame --line-porcelain`` output."""
    out: list[LineAttribution] = []
    owner = None
    line_no = 0
    name = email = ""
    for line in text.split("\n"):
        if not line:
            continue
        if line.startswith("\t"):
            out.append(LineAttribution(commit, path, line_no, owner, (name, email)))
            continue
        head = line.split(" ", 1)
        key = head[0]
        if len(key) == 40 and all(c in "0123456789abcdef" for c in key):
            fields = line.split(" ")
            owner = key
            line_no = int(fields[2])
        elif key == "author":
            name = head[1] if len(head) > 1 else ""
        elif key == "author-mail":
            email = (head[1] if len(head) > 1 else "").strip().strip("<>")
    return out


class Repository:
    """A local git repository accessed through the git executable."""

    def __init__(self, path: str | os.PathLike, git: Optional[str] = None):
        self.path = os.fspath(path)
        self.git = git or git_executable()
        if not os.path.isdir(self.path):
            raise NotARepositoryError(f"not a git repository: {self.path}")
        proc = self._proc(["rev-parse", "--git-dir"], check=False)
        if proc.returncode != 0:
            raise NotARepositoryError(f"not a git repository: {self.path}")
        self._cat = None
        self._cat_lock = threading.Lock()
        self._blame_cache: dict[tuple[str, str], list[LineAttribution]] = {}

    def _proc(self, args: Sequence[str], check: bool = True) -> subprocess.CompletedProcess:
        cmd = [self.git, "-c", "core.quotepath=off", "-C", self.path, *args]
        try:
            proc = subprocess.run(cmd, capture_output=True, env=_git_env())
        except FileNotFoundError as exc:
            raise GitNotFoundError(str(exc)) from exc
        if check and proc.returncode != 0:
            raise GitError(f"git {' '.join(args)} failed: "
                           f"{proc.stderr.decode('utf-8', 'replace').strip()}")
        return proc

    def run(self, *args: str) -> str:
        return self._proc(args).stdout.decode("utf-8", "replace")

    def close(self) -> None:
        if self._cat is not None:
            self._cat.stdin.close()
            self._cat.wait()
            self._cat = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- refs -------------------------------------------------------------

    def has_commits(self) -> bool:
        return bool(self.run("rev-list", "--all", "--max-count=1").strip())

    def current_branch(self) -> str:
        out = self._proc(["symbolic-ref", "--short", "HEAD"], check=False)
        return out.stdout.decode().strip() or "HEAD"

    def resolve(self, rev: str) -> str:
        proc = self._proc(["rev-parse", "--verify", "--quiet", rev + "^{commit}"], check=False)
        if proc.returncode != 0:
            raise UnknownBranchError(f"unknown branch or revision: {rev}")
        return proc.stdout.decode().strip()

    def rev_list(self, branch_mode: str = ALL_BRANCHES, branch: Optional[str] = None) -> list[str]:
        if branch_mode == ALL_BRANCHES:
            return self.run("rev-list", "--all").split()
        branch = branch or self.current_branch()
        self.resolve(branch)
        return self.run("rev-list", branch).split()

    # -- history ----------------------------------------------------------

    def log(self, branch_mode: str = ALL_BRANCHES, branch: Optional[str] = None
            ) -> tuple[list[CommitRecord], dict[str, list[FileChange]]]:
        """Commits plus their numstat rows, in (commit_time, hash) order."""
        if branch_mode not in BRANCH_MODES:
            raise ValueError(f"unknown branch mode {branch_mode!r}")
        if not self.has_commits():
            if branch_mode == SINGLE_BRANCH and branch:
                raise UnknownBranchError(f"unknown branch or revision: {branch}")
            return [], {}
        if branch_mode == ALL_BRANCHES:
            revs = ["--all"]
        else:
            branch = branch or self.current_branch()
            self.resolve(branch)
            revs = [branch]
        text = self.run("log", *revs, "--numstat", "-M", "--diff-merges=first-parent",
                        "--date=raw", f"--pretty=format:{_LOG_FORMAT}")
        commits: list[CommitRecord] = []
        changes: dict[str, list[FileChange]] = {}
        for block in text.split(_RS)[1:]:
            head, _, body = block.partition("\n")
            f = head.split(_FS)
            if len(f) != 8:
                raise GitError(f"unexpected log record: {head!r}")
            rec = CommitRecord(f[0], f[1], f[2], f[3], f[4], _raw_seconds(f[5]),
                               _raw_seconds(f[6]), tuple(f[7].split()), branch_mode)
            commits.append(rec)
            rows = [parse_numstat_line(ln, rec.hash) for ln in body.split("\n") if ln.strip()]
            changes[rec.hash] = rows
        commits.sort(key=lambda c: (c.commit_time, c.hash))
        return commits, changes

    def extract_file_changes(self, commit: str) -> list[FileChange]:
        parents = self.run("rev-list", "--parents", "-n", "1", commit).split()[1:]
        base = parents[0] if parents else EMPTY_TREE
        text = self.run("diff", "--numstat", "-M", base, commit)
        return [parse_numstat_line(ln, commit) for ln in text.split("\n") if ln.strip()]

    def diff(self, commit: str, parent: Optional[str]) -> list[FileDiff]:
        base = parent or EMPTY_TREE
        text = self.run("diff", "-U0", "--no-color", "--no-ext-diff", "-M", base, commit)
        return parse_unified_diff(text)

    def blame_at(self, commit: str, path: str) -> list[LineAttribution]:
        key = (commit, path)
        cached = self._blame_cache.get(key)
        if cached is not None:
            return cached
        proc = self._proc(["blame", "-w", "--line-porcelain", commit, "--", path], check=False)
        if proc.returncode != 0:
            raise PathNotFoundError(f"{path} not present at {commit}")
        rows = parse_blame_porcelain(proc.stdout.decode("utf-8", "replace"), commit, path)
        self._blame_cache[key] = rows
        return rows

    def list_files(self, rev: str) -> list[str]:
        return [p for p in self.run("ls-tree", "-r", "--name-only", rev).split("\n") if p]

    def read_file(self, rev: str, path: str) -> Optional[bytes]:
        """Blob content of ``path`` at ``rev``, or None if absent."""
        with self._cat_lock:
            if self._cat is None:
                self._cat = subprocess.Popen(
                    [self.git, "-C", self.path, "cat-file", "--batch"],
                    stdin=subprocess.PIPE, stdout=subprocess.PIPE, env=_git_env())
            self._cat.stdin.write(f"{rev}:{path}\n".encode())
            self._cat.stdin.flush()
            header = self._cat.stdout.readline().decode().split()
            if len(header) != 3 or header[1] != "blob":
                return None
            data = self._cat.stdout.read(int(header[2]))
            self._cat.stdout.read(1)
            return data


def _git_env() -> dict:
    env = dict(os.environ)
    env.update({"LC_ALL": "C", "GIT_PAGER": "cat", "GIT_CONFIG_NOSYSTEM": "1"})
    return env


def _raw_seconds(raw: str) -> int:
    # --date=raw renders "<epoch> <tz>"; epoch seconds are already UTC
    return int(raw.split()[0])


def extract_commits(repo_path, branch_mode: str = ALL_BRANCHES,
                    filters: Optional[FilterConfig] = None,
                    branch: Optional[str] = None) -> list[CommitRecord]:
    """Commit table for one traversal mode.

    With a ``before_store`` filter, commits whose every file change is
    filtered out are not stored. Commits without file changes (empty
    merges) are always kept.
    """
    repo = repo_path if isinstance(repo_path, Repository) else Repository(repo_path)
    commits, changes = repo.log(branch_mode, branch)
    if filters is None or filters.is_empty or filters.order != FILTER_BEFORE_STORE:
        return commits
    return [c for c in commits
            if not changes[c.hash] or apply_file_filters(changes[c.hash], filters)]
