import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))


@pytest.fixture(scope="session")
def goldens():
    return json.loads((HERE / "fixtures" / "goldens.json").read_text())


@pytest.fixture(scope="session")
def fixtures_dir():
    return HERE / "fixtures"
