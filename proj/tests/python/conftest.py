import os
import shutil
from pathlib import Path

import pytest


def _find_cli():
    env = os.environ.get("CONFSEL_CLI")
    if env:
        return env
    local = Path(__file__).resolve().parents[2] / "build" / "tools" / "confsel"
    if local.exists():
        return str(local)
    return shutil.which("confsel")


@pytest.fixture(scope="session")
def cli():
    path = _find_cli()
    if not path:
        pytest.skip("confsel executable not found")
    return path
