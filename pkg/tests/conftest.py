"""
This is a configuration file for pytest containing customizations and fixtures.

Test names containing ``_slow_`` run the full-size experiments and are marked slow;
``_int_`` tests drive the command line end to end and are marked integration.
"""

from __future__ import annotations

import pytest
from _pytest.nodes import Item

from sosputil import RngStream


def pytest_collection_modifyitems(items: list[Item]):
    for item in items:
        if "_slow_" in item.nodeid:
            item.add_marker(pytest.mark.slow)
        elif "_int_" in item.nodeid:
            item.add_marker(pytest.mark.integration)
        else:
            item.add_marker(pytest.mark.unit)


@pytest.fixture
def rng():
    return RngStream(seed=1234, stream_id=0)
