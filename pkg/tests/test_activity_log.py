import pytest

from dimerlab.activity_log import get_log_path, log_activity, read_recent_activity


def test_log_and_read_back(isolated_home):
    log_activity("count", "cli", "rect:2x2", value=56, route="cofactor")
    log_activity("verify", "mcp", suite="small")
    assert get_log_path() == isolated_home / "data" / "activity.log"
    entries = read_recent_activity()
    assert [e.action for e in entries] == ["verify", "count"]
    assert entries[1].shape == "rect:2x2"
    assert entries[1].details == {"value": 56, "route": "cofactor"}
    assert len(read_recent_activity(limit=1)) == 1


def test_unknown_action_is_rejected():
    with pytest.raises(ValueError, match="Unknown activity action"):
        log_activity("delete", "cli")


def test_missing_log_reads_empty():
    assert read_recent_activity() == []


def test_corrupt_lines_are_skipped():
    log_activity("dist", "cli", "rect:3x3")
    with open(get_log_path(), "a", encoding="utf-8") as f:
        f.write("not json\n\n")
    assert [e.action for e in read_recent_activity()] == ["dist"]


def test_filter_by_action_and_unknown_source():
    log_activity("count", "cli", "rect:2x2")
    log_activity("export", "cli", "rect:2x2", graph="gk")
    assert [e.action for e in read_recent_activity(action="export")] == ["export"]
    with pytest.raises(ValueError, match="Unknown activity source"):
        log_activity("count", "web")
