import json
from pathlib import Path

import pytest

ORACLE_FILE = Path(__file__).parent / "oracles" / "oracle_values.json"


@pytest.fixture(scope="session")
def oracle():
    """Frozen mpmath values; regenerate with tests/oracles/generate_oracles.py."""
    return json.loads(ORACLE_FILE.read_text())
