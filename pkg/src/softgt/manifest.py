"""Dataset manifest loading and CSV report writing.

A manifest is a JSON file::

    {
      "contrasts": ["T1w", "T2w", "T2star"],          # optional declared set
      "participants": [
        {"id": "sub-01",
         "contrasts": {
            "T2w": {"image": "sub-01/T2w.nii.gz",
                    "seg": "sub-01/T2w_seg.nii.gz",
                    "levels": "sub-01/T2w_levels.nii.gz",
                    "gt": "...", "pred": "..."},
            ...}}
      ]
    }

Relative paths resolve against the manifest's directory. Recognised record
keys are ``image``, ``seg``, ``levels``, ``gt`` and ``pred``; all are optional
at load time and each subcommand checks the ones it needs.
"""

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DegenerateInputWarning, ManifestError

log = logging.getLogger(__name__)

DEFAULT_CONTRASTS = ("T1w", "T2w", "T2star", "MTon", "GRET1w", "DWI")
RECORD_KEYS = ("image", "seg", "levels", "gt", "pred")


@dataclass
class DatasetManifest:
    participants: list
    records: dict  # participant -> {contrast -> {key -> Path}}
    contrasts: tuple = DEFAULT_CONTRASTS
    missing_files: list = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self):
        return sum(len(r) for r in self.records.values())

    def iter_records(self):
        """Yield ``(participant, contrast, record)`` sorted by participant then contrast."""
        for pid in sorted(self.records):
            for contrast in sorted(self.records[pid]):
                yield pid, contrast, self.records[pid][contrast]

    def to_json(self):
        parts = []
        for pid in self.participants:
            recs = {
                c: {k: _relpath(p, self.root) for k, p in rec.items()}
                for c, rec in sorted(self.records.get(pid, {}).items())
            }
            parts.append({"id": pid, "contrasts": recs})
        return {"contrasts": list(self.contrasts), "participants": parts}

    def save(self, path):
        path = Path(path)
        saved = DatasetManifest(self.participants, self.records, self.contrasts, root=path.parent)
        path.write_text(json.dumps(saved.to_json(), indent=2) + "\n")
        return path


def _relpath(p, root):
    full = Path(p).resolve()
    try:
        return str(full.relative_to(Path(root).resolve()))
    except ValueError:
        return str(full)


_DUP = "__duplicate_keys__"


def _note_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            seen.setdefault(_DUP, []).append(k)
        seen[k] = v
    return seen


def load_manifest(path):
    """Load and validate a manifest file.

    Missing files are collected in ``manifest.missing_files`` instead of raising;
    a repeated (participant, contrast) pair raises :class:`ManifestError`.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(), object_pairs_hook=_note_duplicates)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "participants" not in doc:
        raise ManifestError(f"{path}: missing 'participants' list")
    declared = tuple(doc.get("contrasts") or DEFAULT_CONTRASTS)
    root = path.parent
    participants = []
    records = {}
    missing = []
    seen_paths = {}
    for entry in doc["participants"]:
        pid = entry.get("id") if isinstance(entry, dict) else None
        if not pid:
            raise ManifestError(f"{path}: participant entry without 'id'")
        if pid not in records:
            participants.append(pid)
            records[pid] = {}
        contrasts = dict(entry.get("contrasts") or {})
        for contrast in contrasts.pop(_DUP, []):
            raise ManifestError(f"{path}: duplicate record for ({pid}, {contrast})")
        for contrast, rec in contrasts.items():
            if contrast in records[pid]:
                raise ManifestError(f"{path}: duplicate record for ({pid}, {contrast})")
            if contrast not in declared:
                raise ManifestError(f"{path}: contrast {contrast!r} of {pid} not in declared set {list(declared)}")
            unknown = set(rec) - set(RECORD_KEYS) - {_DUP}
            if unknown:
                raise ManifestError(f"{path}: unknown keys {sorted(unknown)} in ({pid}, {contrast})")
            resolved = {}
            for key, rel in rec.items():
                p = Path(rel)
                p = p if p.is_absolute() else root / p
                other = seen_paths.get(p.resolve())
                if other is not None and other != (pid, contrast):
                    raise ManifestError(f"{path}: file {p} referenced by both {other} and {(pid, contrast)}")
                seen_paths[p.resolve()] = (pid, contrast)
                if not p.exists():
                    missing.append(p)
                resolved[key] = p
            records[pid][contrast] = resolved
    if not participants:
        warnings.warn(f"{path}: manifest lists no participants", DegenerateInputWarning, stacklevel=2)
    if missing:
        log.warning("%d file(s) referenced by %s do not exist", len(missing), path)
    return DatasetManifest(participants, records, declared, missing, root)


def write_csv(path, columns, rows):
    """Write ``rows`` (dicts) with a header in exactly the order of ``columns``.

    ``None`` becomes an empty cell; floats are written with ``repr`` precision.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else _fmt(row.get(c)) for c in columns])
    return path


def _fmt(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


def read_csv(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
