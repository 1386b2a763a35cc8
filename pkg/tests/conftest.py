import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lucretia import program_path  # noqa: E402


@pytest.fixture
def program_source():
    def load(name: str) -> str:
        return program_path(name).read_text(encoding="utf-8")

    return load
