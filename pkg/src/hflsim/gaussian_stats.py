"""Gaussian summaries of pixel intensities and their hierarchical merge.

An image is summarised by the mean and unbiased variance of all of its
samples, with the R, G and B channels pooled into one distribution. Datasets
(and edge / cloud servers) are summarised by merging child summaries with

    n = sum(n_i),  mean = sum(n_i * mean_i) / n,  var = sum(n_i**2 * var_i) / n**2

i.e. the distribution of the *average* image, not the pooled-pixel mixture.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, EmptyMergeError, ImageFormatError


@dataclass(frozen=True)
class ImagePixels:
    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ImageFormatError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 1 or self.height < 1:
            raise ImageFormatError(f"bad dimensions {self.width}x{self.height}")
        data = np.asarray(self.data).reshape(-1)
        if data.size != self.channels * self.width * self.height:
            raise ImageFormatError(
                f"data length {data.size} != channels*width*height "
                f"({self.channels}*{self.width}*{self.height})"
            )
        if data.size and (data.min() < 0 or data.max() > 255):
            raise ImageFormatError("samples must lie in [0, 255]")
        object.__setattr__(self, "data", data)

    @property
    def num_samples(self) -> int:
        return int(self.data.size)


@dataclass(frozen=True)
class GaussianSummary:
    n: int
    mean: float
    var: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DegenerateInputError(f"summary count must be a positive integer, got {self.n}")
        if not np.isfinite(self.mean) or not np.isfinite(self.var) or self.var < 0:
            raise DegenerateInputError(f"invalid summary moments mean={self.mean} var={self.var}")

    def to_dict(self) -> dict:
        return {"n": int(self.n), "mean": float(self.mean), "var": float(self.var)}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianSummary":
        try:
            return cls(int(d["n"]), float(d["mean"]), float(d["var"]))
        except KeyError as exc:
            raise DegenerateInputError(f"summary is missing field {exc.args[0]!r}") from None


def estimate_image_summary(img: ImagePixels) -> GaussianSummary:
    """Sample mean and Bessel-corrected variance over every sample of every channel."""
    x = img.data
    L = x.size
    if L < 2:
        raise DegenerateInputError(f"need at least 2 samples to estimate a variance, got {L}")
    if np.issubdtype(x.dtype, np.integer):
        # exact integer moments, one rounding each
        xi = x.astype(np.int64)
        s1 = int(xi.sum())
        s2 = int((xi * xi).sum())
        return GaussianSummary(1, s1 / L, (L * s2 - s1 * s1) / (L * (L - 1)))
    xf = x.astype(np.float64)
    mu = float(xf.mean())
    var = float(np.sum((xf - mu) ** 2) / (L - 1))
    return GaussianSummary(1, mu, var)


def merge_summaries(children: Sequence[GaussianSummary]) -> GaussianSummary:
    """Merge child summaries into their parent's summary.

    Children are reduced in list order so the result does not depend on how
    the children were produced.
    """
    if len(children) == 0:
        raise EmptyMergeError("cannot merge an empty list of summaries")
    n = 0
    s_mean = 0.0
    s_var = 0.0
    for c in children:
        n += int(c.n)
        s_mean += c.n * c.mean
        s_var += (c.n * c.n) * c.var
    mean = s_mean / n
    # rounding can push the mean a hair outside the children's range
    lo = min(c.mean for c in children)
    hi = max(c.mean for c in children)
    mean = min(max(mean, lo), hi)
    return GaussianSummary(n, mean, s_var / (n * n))


def dataset_summary(images: Iterable[ImagePixels]) -> GaussianSummary:
    return merge_summaries([estimate_image_summary(im) for im in images])


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def load_ppm(raw: bytes) -> ImagePixels:
    """Decode a binary PGM (P5) or PPM (P6) with maxval 255."""
    pos = 0
    fields = []
    for name in ("magic", "width", "height", "maxval"):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise ImageFormatError(f"truncated header: missing {name}")
        fields.append(m.group(1))
        pos = m.end()
    magic, w, h, maxval = fields
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"bad magic {magic[:8]!r}: expected P5 or P6")
    try:
        width, height, maxv = int(w), int(h), int(maxval)
    except ValueError:
        raise ImageFormatError("non-numeric width/height/maxval in header") from None
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad width/height {width}x{height}")
    if maxv != 255:
        raise ImageFormatError(f"unsupported maxval {maxv}: only 255 is accepted")
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise ImageFormatError("truncated payload: no data after header")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = raw[pos:pos + need]
    if len(payload) < need:
        raise ImageFormatError(f"truncated payload: expected {need} bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype=np.uint8).copy()
    return ImagePixels(width, height, channels, data)


def dump_ppm(img: ImagePixels) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    return header + np.asarray(img.data, dtype=np.uint8).tobytes()
