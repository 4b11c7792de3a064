"""Binary bundle persistence for a trained engine.

Layout: 8-byte magic ``RQSENTRY``, a uint32 little-endian manifest length,
a UTF-8 JSON manifest (format version, configs, vocabulary, threshold, and a
named-parameter index with shapes and byte offsets), the little-endian
float64 parameter payload, and finally a uint32 little-endian CRC-32 of the
payload.  Round-trips are bit-exact, so reloaded models score identically.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .classifier import ClassifierModel
from .codec import Vocabulary
from .detector import DetectorConfig, DetectorModel, ThresholdModel

MAGIC = b"RQSENTRY"
FORMAT_VERSION = 1

DETECTOR_PREFIX = "det."
CLASSIFIER_PREFIX = "clf."


class BundleError(Exception):
    """Unreadable or corrupt bundle file; the message names the fault."""


@dataclass
class EngineBundle:
    vocab: Vocabulary
    detector: DetectorModel
    threshold: ThresholdModel
    classifier: ClassifierModel | None = None
    version: int = FORMAT_VERSION


def _collect_params(bundle: EngineBundle) -> list[tuple[str, np.ndarray]]:
    named = [(DETECTOR_PREFIX + name, arr)
             for name, arr in bundle.detector.store.params.items()]
    if bundle.classifier is not None:
        named += [(CLASSIFIER_PREFIX + name, arr)
                  for name, arr in bundle.classifier.store.params.items()]
    return named


def save_bundle(bundle: EngineBundle, path: str | Path) -> None:
    named = _collect_params(bundle)
    index = []
    offset = 0
    chunks = []
    for name, arr in named:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)

    manifest = {
        "version": FORMAT_VERSION,
        "detector_config": asdict(bundle.detector.config),
        "classifier_config": (asdict(bundle.classifier.config)
                              if bundle.classifier is not None else None),
        # same schema as a standalone vocabulary file
        "vocab": json.loads(bundle.vocab.to_json()),
        "threshold": asdict(bundle.threshold),
        "params": index,
    }
    blob = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_bundle(path: str | Path) -> EngineBundle:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[:len(MAGIC)] != MAGIC:
        raise BundleError(f"{path}: not a bundle file (bad magic)")
    pos = len(MAGIC)
    (manifest_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if len(raw) < pos + manifest_len + 4:
        raise BundleError(f"{path}: truncated bundle (manifest incomplete)")
    try:
        manifest = json.loads(raw[pos:pos + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleError(f"{path}: unreadable manifest ({exc})") from exc
    pos += manifest_len

    version = manifest.get("version")
    if version != FORMAT_VERSION:
        raise BundleError(f"{path}: unsupported bundle version {version!r} "
                          f"(expected {FORMAT_VERSION})")

    payload = raw[pos:-4]
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    expected_size = sum(
        int(np.prod(entry["shape"])) * 8 for entry in manifest["params"])
    if len(payload) != expected_size:
        raise BundleError(f"{path}: truncated bundle (payload is {len(payload)} "
                          f"bytes, index needs {expected_size})")
    if zlib.crc32(payload) != stored_crc:
        raise BundleError(f"{path}: payload checksum mismatch")

    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        start = entry["offset"]
        flat = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        arrays[entry["name"]] = flat.astype(np.float64).reshape(shape)

    vocab = Vocabulary.from_json(json.dumps(manifest["vocab"]))
    det_cfg = DetectorConfig(**manifest["detector_config"])
    det_params = {name[len(DETECTOR_PREFIX):]: arr for name, arr in arrays.items()
                  if name.startswith(DETECTOR_PREFIX)}
    detector = DetectorModel(vocab, det_cfg, params=det_params)

    classifier = None
    if manifest["classifier_config"] is not None:
        clf_cfg = DetectorConfig(**manifest["classifier_config"])
        clf_params = {name[len(CLASSIFIER_PREFIX):]: arr for name, arr in arrays.items()
                      if name.startswith(CLASSIFIER_PREFIX)}
        classifier = ClassifierModel(vocab, clf_cfg, params=clf_params)

    threshold = ThresholdModel(**manifest["threshold"])
    return EngineBundle(vocab=vocab, detector=detector, threshold=threshold,
                        classifier=classifier, version=version)
