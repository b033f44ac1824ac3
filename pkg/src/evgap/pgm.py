"""Binary PGM (P5, maxval 255) read/write and frame loading helpers."""

from pathlib import Path

import numpy as np


def encode_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("PGM frames must be 2-D uint8 arrays")
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    # header tokens: magic, width, height, maxval; comments start with '#'
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(tok) for tok in tokens[1:])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    body = data[pos:pos + w * h]
    if len(body) != w * h:
        raise ValueError("truncated PGM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path, pixels):
    Path(path).write_bytes(encode_pgm(pixels))


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def load_frame(path) -> np.ndarray:
    """Load a ``.pgm`` (uint8) or ``.npy`` frame."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path, allow_pickle=False)
    return read_pgm(path)


def save_npy(path, array):
    np.save(path, np.ascontiguousarray(array), allow_pickle=False)
