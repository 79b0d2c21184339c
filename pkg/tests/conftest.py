import pytest

from dimerlab import activity_log, settings
from dimerlab.models import GridSpec, Terminal


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Point the settings file and activity log at a temporary directory."""
    home = tmp_path / ".dimerlab"
    monkeypatch.setattr(settings, "_DIMERLAB_DIR", home)
    monkeypatch.setattr(settings, "_DEFAULT_SETTINGS_PATH", home / "dimerlab-settings.json")
    monkeypatch.setattr(activity_log, "_LOG_PATH", home / "data" / "activity.log")
    return home


@pytest.fixture
def square2():
    """2x2 grid with the terminal on the west side of the corner."""
    return GridSpec.rectangle(2, 2, [Terminal((1, 1), "W")])


@pytest.fixture
def chain2():
    return GridSpec.chain(2, [Terminal((1, 1), "N")])


@pytest.fixture
def rect23_pair():
    """2x3 grid with three east terminals, for two boundary impurities."""
    return GridSpec.rectangle(
        2, 3, [Terminal((2, 3), "E"), Terminal((2, 2), "E"), Terminal((2, 1), "E")]
    )


@pytest.fixture
def rect45_pair():
    return GridSpec.rectangle(
        4, 5, [Terminal((4, 2), "E"), Terminal((4, 3), "E"), Terminal((4, 4), "E")]
    )


@pytest.fixture
def rect34_near():
    return GridSpec.rectangle(
        3, 4, [Terminal((3, 1), "E"), Terminal((3, 2), "E"), Terminal((3, 3), "E")]
    )


@pytest.fixture
def rect36_near():
    """3x6 grid with terminals on the east side and a long west arc."""
    return GridSpec.rectangle(
        3, 6, [Terminal((3, 2), "E"), Terminal((3, 3), "E"), Terminal((3, 4), "E")]
    )


@pytest.fixture
def chain7_pair():
    return GridSpec.chain(
        7, [Terminal((1, 1), "N"), Terminal((4, 1), "N"), Terminal((7, 1), "N")]
    )
