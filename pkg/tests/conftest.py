"""Shared fixtures: a stub engine binary standing in for the real
render runtime, plus small builders used across test modules."""

import os
import stat
import sys

import pytest

STUB_ENGINE_SOURCE = '''\
#!/usr/bin/env python3
"""Stand-in engine binary; behavior is chosen by the STUB_MODE env var."""
import os
import subprocess
import sys
import time

MP4_BYTES = b"\\x00\\x00\\x00\\x18ftypmp42" + b"\\x00" * 64


def main():
    argv = sys.argv[1:]
    if "--version" in argv:
        print("StubEngine 9.9.1")
        return 0
    mode = os.environ.get("STUB_MODE", "ok")
    print("stub argv: " + " ".join(argv))
    print("stub progress line", file=sys.stderr)
    if mode == "ok":
        outdir = os.path.join(os.getcwd(), "media", "videos")
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "scene.mp4"), "wb") as fh:
            fh.write(MP4_BYTES)
        return 0
    if mode == "no-output":
        return 0
    if mode == "bad-magic":
        with open("scene.mp4", "wb") as fh:
            fh.write(b"NOT-AN-MP4-CONTAINER")
        return 0
    if mode.startswith("fail:"):
        print(mode[len("fail:"):], file=sys.stderr)
        return 3
    if mode.startswith("sleep:"):
        seconds = float(mode[len("sleep:"):])
        with open("engine.pid", "w") as fh:
            fh.write(str(os.getpid()))
        child = subprocess.Popen(
            [
                sys.executable,
                "-c",
                "import os, time\\n"
                "open('child.pid', 'w').write(str(os.getpid()))\\n"
                "time.sleep({0})".format(seconds),
            ]
        )
        time.sleep(seconds)
        child.wait()
        return 0
    print("unknown STUB_MODE: " + mode, file=sys.stderr)
    return 9


if __name__ == "__main__":
    sys.exit(main())
'''


@pytest.fixture(scope="session")
def stub_engine(tmp_path_factory):
    """Path to an executable stub engine script."""
    path = tmp_path_factory.mktemp("stub") / "stub_engine.py"
    path.write_text(STUB_ENGINE_SOURCE, encoding="utf-8")
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return path


@pytest.fixture
def engine_config(stub_engine):
    from manimator.rendering import EngineConfig

    return EngineConfig(
        engine_argv=(str(stub_engine), "{quality}", "{script}", "{scene}"),
        encoder_argv=(str(stub_engine), "--version"),
    )


@pytest.fixture(autouse=True)
def _default_stub_mode(monkeypatch):
    # renders inherit the test process env; keep runs hermetic
    monkeypatch.delenv("STUB_MODE", raising=False)
    monkeypatch.delenv("MANIMATOR_ENGINE_ARGV", raising=False)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one [PASS]/[FAIL] line for every criterion-tagged test."""
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    label = getattr(getattr(item, "function", None), "_criterion", None)
    if label is None:
        return
    reporter = item.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        verdict = "PASS" if report.passed else "FAIL"
        reporter.write_line(f"[{verdict}] {label}")
