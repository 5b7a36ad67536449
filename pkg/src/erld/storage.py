"""On-disk layout of a :class:`ResolutionState`.

A state directory holds ``manifest.json`` (format version plus a SHA-256 and
size per file) and one file per structure. The two token/bucket maps use a
length-prefixed binary layout with sorted keys and sorted postings; the rest
is JSON.
"""

from __future__ import annotations

import contextlib
import hashlib
import io
import json
import os
import struct
from collections.abc import Iterator, Mapping
from pathlib import Path
from typing import Any

from erld.index import InvertedIndex, PrimaryKeyStore
from erld.lsh import LshIndex, LshParams
from erld.matching import PairCache, match_function_from_dict
from erld.model import Document, Entity, SchemaConfig
from erld.pipeline import ResolutionState, StateInvariantError
from erld.traversal import TraversalConfig

FORMAT = "erld-state"
VERSION = 1
POSTINGS_MAGIC = b"ERLDPST1"
LOCK_NAME = ".lock"


class StateError(RuntimeError):
    pass


class StateVersionError(StateError):
    pass


class CorruptStateError(StateError):
    pass


class StateLockedError(StateError):
    pass


def _write_str(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack(">I", len(raw)))
    buf.write(raw)


def encode_postings(postings: Mapping[str, set[str]]) -> bytes:
    buf = io.BytesIO()
    buf.write(POSTINGS_MAGIC)
    buf.write(struct.pack(">I", len(postings)))
    for key in sorted(postings):
        _write_str(buf, key)
        ids = sorted(postings[key])
        buf.write(struct.pack(">I", len(ids)))
        for i in ids:
            _write_str(buf, i)
    return buf.getvalue()


def decode_postings(data: bytes) -> dict[str, set[str]]:
    if not data.startswith(POSTINGS_MAGIC):
        raise CorruptStateError("bad postings header")
    pos = len(POSTINGS_MAGIC)

    def u32() -> int:
        nonlocal pos
        if pos + 4 > len(data):
            raise CorruptStateError("postings file truncated")
        (v,) = struct.unpack_from(">I", data, pos)
        pos += 4
        return v

    def string() -> str:
        nonlocal pos
        n = u32()
        if pos + n > len(data):
            raise CorruptStateError("postings file truncated")
        s = data[pos:pos + n].decode("utf-8")
        pos += n
        return s

    out: dict[str, set[str]] = {}
    for _ in range(u32()):
        key = string()
        out[key] = {string() for _ in range(u32())}
    if pos != len(data):
        raise CorruptStateError("trailing bytes in postings file")
    return out


def _dumps(obj: Any) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _jsonl(rows) -> bytes:
    return b"".join(_dumps(r) for r in rows)


def _doc_row(doc: Document) -> dict[str, Any]:
    return {"id": doc.id, "type": doc.doc_type, "attrs": {k: sorted(v) for k, v in doc.attrs.items()}}


def _doc_from_row(row: Mapping[str, Any]) -> Document:
    return Document(row["id"], row["type"], {k: frozenset(v) for k, v in row["attrs"].items()})


def encode_state(state: ResolutionState) -> dict[str, bytes]:
    config = {
        "schema": state.schema.to_dict(),
        "match_function": state.match_fn.to_dict(),
        "traversal": {
            "max_dst_ust_steps": state.traversal_cfg.max_dst_ust_steps,
            "ust_fanout_threshold": state.traversal_cfg.ust_fanout_threshold,
        },
        "lsh": state.lsh_params.to_dict(),
        "pair_cache_capacity": state.pair_cache.capacity,
        "schema_hash": state.schema_hash,
    }
    return {
        "config.json": _dumps(config),
        "documents.jsonl": _jsonl(_doc_row(state.pk_store[i]) for i in sorted(state.pk_store)),
        "inverted.bin": encode_postings(state.inverted_index.postings),
        "lsh.bin": encode_postings(state.lsh_index.buckets),
        "traversal.json": _dumps({k: sorted(v) for k, v in state.traversal.items()}),
        "entities.jsonl": _jsonl(
            {"entity_id": e.id, "members": sorted(e.members), "doc": _doc_row(e.merged)}
            for _, e in sorted(state.entities.items())
        ),
        "doc_entity.json": _dumps(state.doc_entity_map),
        "tombstones.json": _dumps(state.tombstones),
        "pair_cache.jsonl": _jsonl([list(ka), list(kb), v] for (ka, kb), v in state.pair_cache.items()),
    }


def save_state(state: ResolutionState, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    files = encode_state(state)
    manifest = {"format": FORMAT, "version": VERSION, "files": {}}
    for name, blob in files.items():
        (path / name).write_bytes(blob)
        manifest["files"][name] = {"sha256": hashlib.sha256(blob).hexdigest(), "size": len(blob)}
    # manifest last: a crash mid-save leaves checksums that do not verify
    tmp = path / "manifest.json.tmp"
    tmp.write_bytes(_dumps(manifest))
    os.replace(tmp, path / "manifest.json")


def _read_verified(path: Path) -> dict[str, bytes]:
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StateError(f"no state manifest in {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptStateError(f"unreadable manifest: {exc}") from None
    if manifest.get("format") != FORMAT:
        raise CorruptStateError("not an ERLD state directory")
    if manifest.get("version") != VERSION:
        raise StateVersionError(f"state version {manifest.get('version')!r}, expected {VERSION}")
    out = {}
    for name, meta in manifest["files"].items():
        try:
            blob = (path / name).read_bytes()
        except FileNotFoundError:
            raise CorruptStateError(f"missing state file {name}") from None
        if len(blob) != meta["size"] or hashlib.sha256(blob).hexdigest() != meta["sha256"]:
            raise CorruptStateError(f"checksum mismatch in {name}")
        out[name] = blob
    return out


def _lines(blob: bytes) -> Iterator[Any]:
    for line in blob.decode("utf-8").splitlines():
        if line:
            yield json.loads(line)


def decode_state(files: Mapping[str, bytes]) -> ResolutionState:
    config = json.loads(files["config.json"])
    schema = SchemaConfig.from_dict(config["schema"])
    if schema.fingerprint() != config["schema_hash"]:
        raise CorruptStateError("schema fingerprint mismatch")
    match_fn = match_function_from_dict(config["match_function"], schema)
    pk = PrimaryKeyStore(_doc_from_row(r) for r in _lines(files["documents.jsonl"]))
    inv = InvertedIndex(schema.implicit_delimiters)
    inv.postings = decode_postings(files["inverted.bin"])
    lsh = LshIndex()
    lsh.buckets = decode_postings(files["lsh.bin"])
    entities = {}
    for row in _lines(files["entities.jsonl"]):
        entities[row["entity_id"]] = Entity(row["entity_id"], _doc_from_row(row["doc"]), frozenset(row["members"]))
    cache = PairCache(config["pair_cache_capacity"])
    for ka, kb, v in _lines(files["pair_cache.jsonl"]):
        cache.record((tuple(ka), tuple(kb)), bool(v))
    return ResolutionState(
        schema=schema,
        match_fn=match_fn,
        traversal_cfg=TraversalConfig(**config["traversal"]),
        lsh_params=LshParams.from_dict(config["lsh"]),
        pk_store=pk,
        inverted_index=inv,
        lsh_index=lsh,
        traversal={k: frozenset(v) for k, v in json.loads(files["traversal.json"]).items()},
        doc_entity_map=json.loads(files["doc_entity.json"]),
        entities=entities,
        pair_cache=cache,
        tombstones=json.loads(files["tombstones.json"]),
    )


def load_state(path: str | Path) -> ResolutionState:
    """Read and verify a state directory; invariants are checked before return."""
    files = _read_verified(Path(path))
    try:
        state = decode_state(files)
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptStateError(f"malformed state: {exc}") from None
    try:
        state.check_invariants()
    except StateInvariantError as exc:
        raise CorruptStateError(f"state invariant violated: {exc}") from None
    return state


@contextlib.contextmanager
def state_lock(path: str | Path) -> Iterator[None]:
    """Exclusive writer lock on a state directory. A second writer fails
    immediately instead of waiting."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lock = path / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StateLockedError(f"state {path} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()
