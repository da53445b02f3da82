import json

import pytest

from softgt.errors import DegenerateInputWarning, ManifestError
from softgt.manifest import load_manifest, read_csv, write_csv


def _write(tmp_path, doc, text=None):
    p = tmp_path / "manifest.json"
    p.write_text(text if text is not None else json.dumps(doc))
    return p


def _touch(tmp_path, *names):
    for n in names:
        (tmp_path / n).write_bytes(b"")


def test_load_resolves_paths(tmp_path):
    _touch(tmp_path, "a.nii", "b.nii")
    doc = {"contrasts": ["T1w", "T2w"], "participants": [
        {"id": "s2", "contrasts": {"T2w": {"seg": "b.nii"}}},
        {"id": "s1", "contrasts": {"T1w": {"seg": "a.nii"}}},
    ]}
    m = load_manifest(_write(tmp_path, doc))
    assert m.participants == ["s2", "s1"]
    assert [(p, c) for p, c, _ in m.iter_records()] == [("s1", "T1w"), ("s2", "T2w")]
    assert m.records["s1"]["T1w"]["seg"] == tmp_path / "a.nii"
    assert m.missing_files == []
    assert len(m) == 2


def test_missing_files_collected(tmp_path):
    doc = {"participants": [{"id": "s1", "contrasts": {"T1w": {"seg": "nope.nii"}}}]}
    m = load_manifest(_write(tmp_path, doc))
    assert m.missing_files == [tmp_path / "nope.nii"]


def test_duplicate_contrast_key(tmp_path):
    text = '{"participants": [{"id": "s1", "contrasts": {"T1w": {"seg": "a"}, "T1w": {"seg": "b"}}}]}'
    with pytest.raises(ManifestError, match=r"duplicate record for \(s1, T1w\)"):
        load_manifest(_write(tmp_path, None, text))


def test_duplicate_across_entries(tmp_path):
    doc = {"participants": [{"id": "s1", "contrasts": {"T1w": {"seg": "a"}}},
                            {"id": "s1", "contrasts": {"T1w": {"seg": "b"}}}]}
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(_write(tmp_path, doc))


def test_shared_path_rejected(tmp_path):
    doc = {"participants": [{"id": "s1", "contrasts": {"T1w": {"seg": "a"}, "T2w": {"seg": "a"}}}]}
    with pytest.raises(ManifestError, match="referenced by both"):
        load_manifest(_write(tmp_path, doc))


@pytest.mark.parametrize("doc", [
    {"participants": [{"contrasts": {}}]},
    {"participants": [{"id": "s1", "contrasts": {"FLAIR": {"seg": "a"}}}]},
    {"participants": [{"id": "s1", "contrasts": {"T1w": {"mask": "a"}}}]},
    {"nothing": []},
])
def test_invalid(tmp_path, doc):
    with pytest.raises(ManifestError):
        load_manifest(_write(tmp_path, doc))


def test_invalid_json(tmp_path):
    with pytest.raises(ManifestError, match="invalid JSON"):
        load_manifest(_write(tmp_path, None, "{"))


def test_empty_warns(tmp_path):
    with pytest.warns(DegenerateInputWarning):
        m = load_manifest(_write(tmp_path, {"participants": []}))
    assert len(m) == 0


def test_save_roundtrip(tmp_path):
    _touch(tmp_path, "a.nii")
    m = load_manifest(_write(tmp_path, {"participants": [{"id": "s1", "contrasts": {"T1w": {"seg": "a.nii"}}}]}))
    out = tmp_path / "sub"
    out.mkdir()
    m2 = load_manifest(m.save(out / "m.json"))
    assert m2.records["s1"]["T1w"]["seg"].resolve() == (tmp_path / "a.nii").resolve()


def test_csv(tmp_path):
    p = write_csv(tmp_path / "x.csv", ("a", "b", "c"), [{"a": 0.1, "b": None, "c": True}, {"a": "x", "c": 3}])
    assert p.read_text().splitlines() == ["a,b,c", "0.1,,1", "x,,3"]
    assert read_csv(p)[1] == {"a": "x", "b": "", "c": "3"}


def test_two_by_two(tmp_path):
    doc = {"contrasts": ["T1w", "T2w"], "participants": [
        {"id": p, "contrasts": {c: {"image": f"{p}_{c}.nii", "seg": f"{p}_{c}_seg.nii"} for c in ("T1w", "T2w")}}
        for p in ("s1", "s2")
    ]}
    m = load_manifest(_write(tmp_path, doc))
    assert len(m) == 4 and len(list(m.iter_records())) == 4
    assert len(m.missing_files) == 8
