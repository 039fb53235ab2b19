"""Canonical JSON, hashing and the JSONL store layer."""

import math

import pytest

from pregame.storage import (
    DataError,
    canonical_json,
    file_sha256,
    read_store,
    sha256_hex,
    write_store,
)


class TestCanonicalJson:
    def test_sorted_compact(self):
        assert canonical_json({"b": [1, 2], "a": 1}) == '{"a":1,"b":[1,2]}'

    def test_no_spaces(self):
        text = canonical_json({"k": {"y": 2, "x": 1}})
        assert " " not in text
        assert text == '{"k":{"x":1,"y":2}}'

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"v": math.nan})

    def test_float_repr_roundtrips(self):
        import json
        v = 0.1 + 0.2
        assert json.loads(canonical_json({"v": v}))["v"] == v


class TestHashing:
    def test_known_vector(self):
        want = ("ba7816bf8f01cfea414140de5dae2223"
                "b00361a396177a9cb410ff61f20015ad")
        assert sha256_hex("abc") == want
        assert sha256_hex(b"abc") == want

    def test_file_hash_matches_content_hash(self, tmp_path):
        path = tmp_path / "blob.bin"
        path.write_bytes(b"some bytes\n" * 100)
        assert file_sha256(path) == sha256_hex(b"some bytes\n" * 100)


class TestStoreRoundtrip:
    def test_header_then_records(self, tmp_path):
        path = tmp_path / "s.jsonl"
        digest = write_store(path, {"store": "demo", "n": 2},
                             [{"a": 1}, {"a": 2}])
        header, records = read_store(path, expect="demo")
        assert header == {"store": "demo", "n": 2}
        assert records == [{"a": 1}, {"a": 2}]
        assert digest == file_sha256(path)

    def test_bytes_are_content_deterministic(self, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_store(p1, {"store": "demo"}, [{"x": 1.5}])
        write_store(p2, {"store": "demo"}, [{"x": 1.5}])
        assert p1.read_bytes() == p2.read_bytes()

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"store":"demo"}\n\n{"a":1}\n\n')
        _, records = read_store(path, expect="demo")
        assert records == [{"a": 1}]

    def test_creates_parent_dirs(self, tmp_path):
        path = tmp_path / "deep" / "down" / "s.jsonl"
        write_store(path, {"store": "demo"}, [])
        assert path.exists()


class TestStoreErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            read_store(tmp_path / "absent.jsonl")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text("")
        with pytest.raises(DataError, match="empty store"):
            read_store(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text("not json\n")
        with pytest.raises(DataError, match="bad header"):
            read_store(path)

    def test_non_object_header(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text("[1,2]\n")
        with pytest.raises(DataError, match="header must be an object"):
            read_store(path)

    def test_wrong_store_tag(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_store(path, {"store": "events"}, [])
        with pytest.raises(DataError, match="expected store"):
            read_store(path, expect="interviews")

    def test_bad_record_line(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"store":"demo"}\n{"a":1}\n{broken\n')
        with pytest.raises(DataError, match=":3:"):
            read_store(path)

    def test_non_object_record(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"store":"demo"}\n[1]\n')
        with pytest.raises(DataError, match="record must be an object"):
            read_store(path)
