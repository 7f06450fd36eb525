from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from repobuilder import BASE_TIME, RepoBuilder  # noqa: E402

DAY = 86400
A = ("Alice", "alice@example.org")
B = ("Bob", "bob@example.org")
C = ("Carol", "carol@example.org")


@pytest.fixture
def builder(tmp_path):
    return RepoBuilder(tmp_path / "repo")


def build_f1(path) -> RepoBuilder:
    """Fixture F1: 12 commits over two branches; the side branch is never merged.

    main gets 8 commits spread across Jan-Jun 2021, ``feature`` forks after the
    second main commit and adds 4 commits in April-May.
    """
    r = RepoBuilder(path)
    t0 = 1609459200  # 2021-01-01
    main_days = [1, 20, 45, 70, 100, 130, 150, 170]
    feature_days = [95, 105, 115, 125]
    for k, d in enumerate(main_days[:2]):
        r.commit(A if k % 2 == 0 else B, t0 + d * DAY, files={"src/main.c": f"int v{k};\n" * (k + 1)})
    r.checkout("feature", create=True)
    for k, d in enumerate(feature_days):
        r.commit(C, t0 + d * DAY, files={"src/feature.c": f"int f{k};\n" * (k + 1)})
    r.checkout("main")
    for k, d in enumerate(main_days[2:], start=2):
        r.commit(A if k % 2 == 0 else B, t0 + d * DAY, files={"src/main.c": f"int v{k};\n" * (k + 1)})
    return r


@pytest.fixture
def f1_repo(tmp_path):
    return build_f1(tmp_path / "f1")


F2_BEFORE = """int work(int x)
{
    int a = 1;
    int b = 2;
    int c = 3;
    int d = 4;
    int e = 5;
    int f = 6;
    int g = 7;
    int h = 8;
    int i = 9;
    return a + b + c + d + e + f + g + h + i + x;
}
"""

F2_AFTER = F2_BEFORE.replace("int a = 1;", "int a = 10;").replace(
    "int e = 5;", "int e = 50;").replace("int i = 9;", "int i = 90;")


def build_f2(path) -> RepoBuilder:
    """Fixture F2: one C function edited in three separate hunks."""
    r = RepoBuilder(path)
    r.commit(A, BASE_TIME, files={"work.c": F2_BEFORE})
    r.commit(B, BASE_TIME + DAY, files={"work.c": F2_AFTER})
    return r


@pytest.fixture
def f2_repo(tmp_path):
    return build_f2(tmp_path / "f2")


F3_MODULES = ("m1", "m2", "m3", "m4", "m5")


def build_f3(root) -> dict:
    """Fixture F3: five modules where bug density rises with newcomer churn.

    Module ``mk`` holds 100 code lines and receives k one-line bug fixes, so
    activity and density ranks agree exactly. ``m5`` also carries a 900-line
    guide under ``m5/docs/``; counting it swells m5's size so its density
    falls to the bottom and the rank relation breaks. Everything happens in the
    first week, so every contribution is a newcomer contribution.
    """
    root = os.fspath(root)
    r = RepoBuilder(os.path.join(root, "repo"))
    devs = [(f"Dev {k}", f"dev{k}@example.org") for k in range(5)]
    t = BASE_TIME
    r.commit(devs[0], t, files={f"{m}/code.c": "".join(f"int {m}_{i};\n" for i in range(100))
                                for m in F3_MODULES})
    fixes = []
    for k, m in enumerate(F3_MODULES, start=1):
        for n in range(k):
            t += 3600
            lines = [f"int {m}_{i};\n" for i in range(100)]
            lines[n] = f"int {m}_{n} = {n + 1};\n"
            r.commit(devs[k - 1], t, f"fix crash {m} {n}", files={f"{m}/code.c": "".join(lines)})
            fixes.append(r.head())
    t += 3600
    r.commit(devs[4], t, "write guide", files={"m5/docs/guide.txt": "".join(f"step {i}\n" for i in range(900))})
    with open(os.path.join(root, "bugfixes.txt"), "w") as fh:
        fh.write("".join(h + "\n" for h in fixes))
    return {"root": root, "repo": r, "bugfixes": fixes}


def f3_config(root, flip: bool = True, resamples: int = 400) -> str:
    """Two-variant turnover-only config for F3; ``flip`` adds the doc filter to one side."""
    deny = '["^[^/]+/docs/"]' if flip else "[]"
    text = f"""[run]
repo = "repo"
project = "f3"
studies = ["turnover"]
seed = 3
bootstrap_resamples = {resamples}

[inputs]
bugfixes = "bugfixes.txt"

[[variant]]
name = "with_docs"

[[variant]]
name = "no_docs"
[variant.extract]
deny_patterns = {deny}
"""
    path = os.path.join(os.fspath(root), "f3.toml")
    with open(path, "w") as fh:
        fh.write(text)
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
