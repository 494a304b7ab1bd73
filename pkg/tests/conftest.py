import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eyescreen import config as config_mod  # noqa: E402
from eyescreen.synth import SynthConfig, generate  # noqa: E402


SMALL = {
    "synth": {"participants_per_profile": 4, "texts": 6, "words_per_text": 30},
    "train": {
        "max_rows": 1200,
        "final_max_rows": 2000,
        "enhance": {"n_initial": 2, "n_iterations": 2},
        "select": {"max_k": 12, "n_trees": 8},
        "search": {"n_initial": 3, "n_iterations": 3,
                   "dimensions": {"n_trees": [5, 20, "int"], "max_depth": [3, 12, "int"]}},
    },
    "eval": {"max_rows": 2000},
}


@pytest.fixture
def small_cfg(tmp_path):
    return config_mod.load(None, {**SMALL, "output_dir": str(tmp_path / "out")})


@pytest.fixture(scope="session")
def small_corpus():
    return generate(SynthConfig(participants_per_profile=3, texts=4, words_per_text=25, seed=5))


@pytest.fixture
def acceptance_log(request):
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
