import pytest

from _util import HOST_CC


def pytest_collection_modifyitems(config, items):
    if HOST_CC is not None:
        return
    skip = pytest.mark.skip(reason="no host C compiler")
    for item in items:
        if "needs_cc" in item.keywords:
            item.add_marker(skip)


def pytest_configure(config):
    config.addinivalue_line("markers", "needs_cc: test compiles and runs generated C")
