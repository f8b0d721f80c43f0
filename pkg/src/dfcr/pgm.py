"""Binary PGM (P5) raster I/O and attack artifact emission."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .detectors import RasterImage, make_raster


def write_pgm(image: RasterImage, path: str | Path) -> None:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    body = np.clip(np.rint(image.data), 0, 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + body)


def read_pgm(path: str | Path) -> RasterImage:
    blob = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":  # comment line
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM file: magic {fields[0]!r}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace after maxval
    raster = np.frombuffer(blob, dtype=np.uint8, count=width * height, offset=pos)
    return make_raster(raster.reshape(height, width).astype(float))


def write_attack_artifact(prefix: str | Path, image: RasterImage,
                          manifest: dict) -> tuple[Path, Path]:
    """Write the adversarial raster plus its JSON sidecar manifest."""
    prefix = Path(prefix)
    pgm_path = prefix.with_suffix(".pgm")
    json_path = prefix.with_suffix(".json")
    write_pgm(image, pgm_path)
    json_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                         encoding="utf-8")
    return pgm_path, json_path
