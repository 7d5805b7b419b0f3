"""Pytest configuration and fixtures."""

import logging

import pytest

from efmatch.config import InstanceDocument
from efmatch.core import MarketInstance
from efmatch.generate import lower_quota_deadlock
from efmatch.quotas.base import IntervalQuota


@pytest.fixture(autouse=True)
def cleanup_loggers():
    """Reset efmatch loggers after each test so setup_logger can run again."""
    yield

    for name in list(logging.Logger.manager.loggerDict.keys()):
        if name.startswith("efmatch"):
            logger = logging.getLogger(name)
            for handler in list(logger.handlers):
                handler.close()
                logger.removeHandler(handler)
            logger.setLevel(logging.NOTSET)
            logger.propagate = True


@pytest.fixture
def deadlock() -> MarketInstance:
    return lower_quota_deadlock()


@pytest.fixture
def zero_lower() -> MarketInstance:
    """Two doctors, two hospitals, every lower quota 0."""
    return MarketInstance.from_preferences(
        doctor_prefs={"d1": ["h1", "h2"], "d2": ["h2"]},
        hospital_prefs={"h1": ["d1"], "h2": ["d1", "d2"]},
        quotas={"h1": IntervalQuota(0, 1), "h2": IntervalQuota(0, 1)},
    )


@pytest.fixture
def instance_file(tmp_path):
    """Write an instance document under tmp_path and return its path."""

    def write(instance: MarketInstance, name: str = "instance.json"):
        path = tmp_path / name
        path.write_text(InstanceDocument.from_instance(instance).to_json())
        return path

    return write
