import os

import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the slow desk-scale study tests")
    parser.addoption("--runpaper", action="store_true", default=False,
                     help="run the optional full-scale (--preset paper) reproduction")


def pytest_collection_modifyitems(config, items):
    run_slow = config.getoption("--runslow") or \
        os.environ.get("WESTFEM_RUN_SLOW") == "1"
    run_paper = config.getoption("--runpaper") or \
        os.environ.get("WESTFEM_RUN_PAPER") == "1"
    skip_slow = pytest.mark.skip(reason="slow test: pass --runslow")
    skip_paper = pytest.mark.skip(reason="paper-scale test: pass --runpaper")
    for item in items:
        if "paper_scale" in item.keywords and not run_paper:
            item.add_marker(skip_paper)
        elif "slow" in item.keywords and not run_slow:
            item.add_marker(skip_slow)
