"""Image representation, PNG / PFT1 file formats, normalization.

Images are plain numpy arrays laid out channel-major, ``(C, H, W)``, with
``C`` in {1, 3}.  Planes are ``(H, W)`` arrays.
"""
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .errors import BadMagic, DimensionOverflow, ShapeMismatch, UnsupportedPng

MAGIC = b"PFT1"
HEADER = struct.Struct("<4sBIII")  # magic, rank, channels, height, width (17 bytes)
_U32_MAX = 2**32 - 1
# guards against headers that would make us allocate absurd buffers
MAX_ELEMENTS = 1 << 28

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def check_image(x, min_size=1):
    """Validate an image array and return it as float64 (C, H, W)."""
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] not in (1, 3):
        raise ShapeMismatch(f"expected (C, H, W) with C in {{1, 3}}, got {x.shape}")
    if x.shape[1] < min_size or x.shape[2] < min_size:
        raise ShapeMismatch(f"image {x.shape[1]}x{x.shape[2]} smaller than {min_size}x{min_size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains NaN or Inf")
    return x.astype(np.float64, copy=False)


def same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ShapeMismatch(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


# ---------------------------------------------------------------- PNG

def load_png(path):
    """Read an 8-bit grayscale or RGB PNG as a float image in [0, 1]."""
    with PILImage.open(path) as im:
        if im.format != "PNG":
            raise UnsupportedPng(f"{path}: not a PNG ({im.format})")
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)[None]
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=np.uint8).transpose(2, 0, 1)
        else:
            # P (palette), LA/RGBA (alpha), I;16 / I (16-bit), 1 (bilevel)
            raise UnsupportedPng(f"{path}: unsupported PNG mode {im.mode!r}")
    return arr.astype(np.float64) / 255.0


def to_bytes(img):
    """Quantize a [0, 1] image to uint8 with clamping."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(img, path):
    img = check_image(img)
    q = to_bytes(img)
    if q.shape[0] == 1:
        PILImage.fromarray(q[0], mode="L").save(path, format="PNG")
    else:
        PILImage.fromarray(np.ascontiguousarray(q.transpose(1, 2, 0)), mode="RGB").save(path, format="PNG")


# ---------------------------------------------------------------- PFT1

def encode_tensor(img):
    """Serialize a (C, H, W) array as PFT1 bytes (float32, little-endian)."""
    img = np.asarray(img)
    if img.ndim != 3:
        raise ShapeMismatch(f"PFT1 holds rank-3 tensors, got shape {img.shape}")
    c, h, w = img.shape
    if max(c, h, w) > _U32_MAX:
        raise DimensionOverflow(f"dimension exceeds u32: {img.shape}")
    payload = np.ascontiguousarray(img, dtype="<f4").tobytes()
    return HEADER.pack(MAGIC, 3, c, h, w) + payload


def decode_tensor(buf):
    """Parse PFT1 bytes into a float32 (C, H, W) array."""
    buf = memoryview(buf)
    if len(buf) < HEADER.size:
        raise BadMagic("truncated PFT1 header")
    magic, rank, c, h, w = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {bytes(magic)!r}")
    if rank != 3:
        raise BadMagic(f"unsupported rank {rank}")
    n = c * h * w
    if n > MAX_ELEMENTS:
        raise DimensionOverflow(f"tensor of {c}x{h}x{w} elements is too large")
    expected = HEADER.size + 4 * n
    if len(buf) != expected:
        raise BadMagic(f"payload size {len(buf) - HEADER.size} != {4 * n}")
    data = np.frombuffer(buf, dtype="<f4", count=n, offset=HEADER.size)
    return data.astype(np.float32).reshape(c, h, w)


def write_tensor(img, path):
    with open(path, "wb") as fh:
        fh.write(encode_tensor(img))


def read_tensor(path):
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())


# ---------------------------------------------------------------- normalization

@dataclass(frozen=True)
class NormalizationSpec:
    mean: tuple = (0.485, 0.456, 0.406)
    std: tuple = (0.229, 0.224, 0.225)

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValueError("mean and std need three components")
        if min(self.std) <= 0:
            raise ValueError("std components must be positive")

    @classmethod
    def identity(cls):
        return cls((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    def _stats(self, channels):
        mean = np.asarray(self.mean[:channels], dtype=np.float64)
        std = np.asarray(self.std[:channels], dtype=np.float64)
        return mean[:, None, None], std[:, None, None]


def normalize(img, spec):
    """Per-channel (x - mean) / std.  Grayscale images use channel 0 stats."""
    img = np.asarray(img, dtype=np.float64)
    mean, std = spec._stats(img.shape[0])
    return (img - mean) / std


def denormalize(img, spec):
    img = np.asarray(img, dtype=np.float64)
    mean, std = spec._stats(img.shape[0])
    return img * std + mean


def to_luminance(img):
    """BT.601 luma for RGB; grayscale is copied."""
    img = check_image(img)
    if img.shape[0] == 1:
        return img[0].copy()
    r, g, b = LUMA_WEIGHTS
    return r * img[0] + g * img[1] + b * img[2]
