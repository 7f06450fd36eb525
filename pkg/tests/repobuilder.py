"""Build small git repositories from scripted commits for tests."""

from __future__ import annotations

import os
import random
import subprocess
from typing import Optional

BASE_TIME = 1_600_000_000  # 2020-09-13


class RepoBuilder:
    def __init__(self, path):
        self.path = str(path)
        os.makedirs(self.path, exist_ok=True)
        self.git("init", "-q", "-b", "main")
        self.git("config", "commit.gpgsign", "false")

    def git(self, *args: str, env: Optional[dict] = None) -> str:
        full = {**os.environ, "LC_ALL": "C", "GIT_CONFIG_NOSYSTEM": "1", "HOME": self.path,
                **(env or {})}
        out = subprocess.run(["git", "-C", self.path, *args], env=full, check=True,
                             capture_output=True)
        return out.stdout.decode()

    def write(self, rel: str, content) -> None:
        p = os.path.join(self.path, rel)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        mode = "wb" if isinstance(content, bytes) else "w"
        with open(p, mode) as fh:
            fh.write(content)

    def commit(self, author: tuple[str, str], when: int, message: str = "change",
               files: Optional[dict] = None, delete: tuple = (), rename: tuple = (),
               committer: Optional[tuple[str, str]] = None, commit_time: Optional[int] = None) -> str:
        for old, new in rename:
            os.makedirs(os.path.dirname(os.path.join(self.path, new)) or self.path, exist_ok=True)
            self.git("mv", old, new)
        for rel, content in (files or {}).items():
            self.write(rel, content)
        for rel in delete:
            self.git("rm", "-q", rel)
        self.git("add", "-A")
        cname, cemail = committer or author
        env = {"GIT_AUTHOR_NAME": author[0], "GIT_AUTHOR_EMAIL": author[1],
               "GIT_AUTHOR_DATE": f"@{when} +0000", "GIT_COMMITTER_NAME": cname,
               "GIT_COMMITTER_EMAIL": cemail,
               "GIT_COMMITTER_DATE": f"@{commit_time if commit_time is not None else when} +0000"}
        self.git("commit", "-q", "--allow-empty", "-m", message, env=env)
        return self.head()

    def head(self) -> str:
        return self.git("rev-parse", "HEAD").strip()

    def checkout(self, branch: str, create: bool = False) -> None:
        self.git("checkout", "-q", *(["-b"] if create else []), branch)

    def merge(self, branch: str, author: tuple[str, str], when: int) -> str:
        env = {"GIT_AUTHOR_NAME": author[0], "GIT_AUTHOR_EMAIL": author[1],
               "GIT_AUTHOR_DATE": f"@{when} +0000", "GIT_COMMITTER_NAME": author[0],
               "GIT_COMMITTER_EMAIL": author[1], "GIT_COMMITTER_DATE": f"@{when} +0000"}
        self.git("merge", "-q", "--no-ff", "-m", f"merge {branch}", branch, env=env)
        return self.head()


def c_function(name: str, body_lines: int, salt: int = 0) -> str:
    body = "".join(f"    x = x + {i + salt};\n" for i in range(body_lines))
    return f"int {name}(int x)\n{{\n{body}    return x;\n}}\n"


def synthetic_project(path, n_commits: int = 200, seed: int = 7, n_devs: int = 9) -> RepoBuilder:
    """Deterministic multi-author C/Python project with modules, renames and a side branch."""
    rng = random.Random(seed)
    devs = [(f"Dev {chr(65 + i)}", f"dev{i}@example.org") for i in range(n_devs)]
    # one developer uses two spellings so identity merging matters
    alias = ("dev a", "dev0@mail.example.net")
    weights = [max(1, 12 - 2 * i) for i in range(n_devs)]
    modules = ["core", "net", "util", "docs"]
    files: dict[str, dict[str, int]] = {}  # path -> function name -> salt
    repo = RepoBuilder(path)
    t = BASE_TIME
    bugfixes = []
    for k in range(n_commits):
        t += rng.randint(3, 5) * 86400 + rng.randint(0, 80000)
        # developers join late and leave early to create turnover
        active = [i for i in range(n_devs)
                  if (i * n_commits // (2 * n_devs)) <= k < n_commits - (i % 3) * n_commits // 8]
        i = rng.choices(active, weights=[weights[j] for j in active])[0]
        author = alias if i == 0 and k % 5 == 0 else devs[i]
        mod = rng.choice(modules)
        changed = {}
        if mod == "docs":
            p = f"docs/page{rng.randint(0, 3)}.md"
            changed[p] = "".join(f"line {rng.randint(0, 99)}\n" for _ in range(rng.randint(3, 12)))
        elif mod == "util":
            p = f"util/helpers{rng.randint(0, 1)}.py"
            fns = files.setdefault(p, {})
            name = f"helper{rng.randint(0, 5)}"
            fns[name] = fns.get(name, 0) + 1
            changed[p] = "".join(
                f"def {n}(x):\n" + "".join(f"    x += {s + j}\n" for j in range(3)) + "    return x\n\n"
                for n, s in sorted(fns.items()))
        else:
            p = f"{mod}/{mod}{rng.randint(0, 2)}.c"
            fns = files.setdefault(p, {})
            for _ in range(rng.randint(1, 2)):
                name = f"{mod}_fn{rng.randint(0, 6)}"
                fns[name] = fns.get(name, 0) + rng.randint(1, 3)
            changed[p] = "".join(c_function(n, 3 + s % 4, s) for n, s in sorted(fns.items()))
        msg = "fix crash" if rng.random() < 0.2 else "update"
        h = repo.commit(author, t, msg, files=changed)
        if msg.startswith("fix"):
            bugfixes.append(h)
        if k == n_commits // 2:
            repo.write("assets/logo.bin", bytes(range(256)) * 4)
            repo.commit(devs[1], t + 60, "add logo")
    repo.bugfixes = bugfixes
    return repo
