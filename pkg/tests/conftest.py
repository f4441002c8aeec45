import pathlib

import pytest

from noteloop.config import EngineConfig

GOLDEN = pathlib.Path(__file__).parent / "golden"

APPENDIX_SENTENCE = "People went from city to city, holding rallies, and meetings."
APPENDIX_KEYWORD_RESPONSE = "people\ncity\nrallies\nmeetings"
APPENDIX_DISPLAYED = ("people", "city", "rallies", "meetings")
APPENDIX_EXCLUSIVE_RESPONSE = "media\ncivilization"
APPENDIX_CONTEXTUAL_RESPONSE = "speeches\nsign"
APPENDIX_ORGANIZE_RESPONSE = (
    "What city had the most impactful signs?\n"
    "What signs were displayed in each city?\n"
    "What city had the most controversial signs?"
)


@pytest.fixture
def fast_config():
    """Mock backend with small latencies; keeps unit tests snappy."""
    return EngineConfig(
        mock_latency_extraction_ms=100,
        mock_latency_derivation_ms=50,
        mock_latency_organization_ms=80,
    )


def golden_text(name: str) -> str:
    return (GOLDEN / name).read_text("utf-8")
