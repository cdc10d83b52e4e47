"""Access to the calibrated constants committed in ``constants.json``."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

CONSTANTS_FILE = "constants.json"


@lru_cache(maxsize=1)
def load_constants() -> dict:
    """The committed calibration constants (read once per process)."""
    text = resources.files("fracbayes").joinpath(CONSTANTS_FILE).read_text(encoding="utf-8")
    return json.loads(text)
