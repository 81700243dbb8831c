import pytest

from evtol_dclink import kvfile
from evtol_dclink.errors import ConfigError


def test_blocks_and_header():
    doc = kvfile.parse_text("a = 1\n# note\n[x]\nk = v  # trailing\n\n[x]\nk = w\n", "f.txt")
    assert doc.header.values == {"a": "1"}
    assert [b.values["k"] for b in doc.blocks_named("x")] == ["v", "w"]
    assert doc.blocks[1].lineno == 6


def test_duplicate_key_in_block():
    with pytest.raises(ConfigError, match="f.txt:3"):
        kvfile.parse_text("[x]\nk = 1\nk = 2\n", "f.txt")


def test_malformed_line():
    with pytest.raises(ConfigError, match="f.txt:2"):
        kvfile.parse_text("[x]\njust words\n", "f.txt")


def test_convert_bad_number():
    doc = kvfile.parse_text("[x]\nk = abc\n", "f.txt")
    with pytest.raises(ConfigError, match="f.txt:2"):
        kvfile.convert(doc, doc.blocks[0], {"k": float})


def test_dump_parses_back():
    text = kvfile.dump({"h": 0.75}, [("b", {"x": 1.5, "name": "n"})])
    doc = kvfile.parse_text(text)
    assert doc.header.values == {"h": "0.75"} and doc.blocks[0].values == {"x": "1.5", "name": "n"}


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        kvfile.parse_file(tmp_path / "nope.txt")
