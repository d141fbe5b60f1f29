# stdlib
import io
from pathlib import Path
from typing import Optional, Union

# third party
import numpy as np
import pydicom
from PIL import Image, UnidentifiedImageError
from pydicom.errors import InvalidDicomError
from pydicom.uid import ExplicitVRLittleEndian
from scipy import ndimage

# first party
from exceptions import MalformedHeader, TruncatedPixelData, UnsupportedFeature
from helpers import get_logger
from schema import GRID_SIZE, NormalizedImage, RasterImage, SourceFormat

logger = get_logger(__name__)

PGM_MAGIC = b"P5"
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
DICOM_PREAMBLE_LENGTH = 128
DICOM_MAGIC = b"DICM"
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

SUFFIX_FORMATS = {
    ".pgm": SourceFormat.pgm,
    ".png": SourceFormat.png,
    ".dcm": SourceFormat.dicom_subset,
    ".dicom": SourceFormat.dicom_subset,
}


def load_image(data: bytes, fmt: SourceFormat) -> RasterImage:
    """
    Decode a scan from raw bytes.

    Args:
        data: File contents
        fmt: One of the supported source formats

    Returns:
        RasterImage with channel values on [0, 255]
    """
    if not data:
        raise MalformedHeader("empty input")
    fmt = SourceFormat(fmt)
    if fmt == SourceFormat.pgm:
        return _load_pgm(data)
    if fmt == SourceFormat.png:
        return _load_png(data)
    return _load_dicom(data)


def detect_format(path: Union[str, Path], data: bytes) -> SourceFormat:
    suffix = Path(path).suffix.lower()
    if suffix in SUFFIX_FORMATS:
        return SUFFIX_FORMATS[suffix]
    if data.startswith(PGM_MAGIC):
        return SourceFormat.pgm
    if data.startswith(PNG_MAGIC):
        return SourceFormat.png
    if data[DICOM_PREAMBLE_LENGTH : DICOM_PREAMBLE_LENGTH + 4] == DICOM_MAGIC:
        return SourceFormat.dicom_subset
    raise MalformedHeader(f"cannot tell the format of {path}")


def load_image_file(path: Union[str, Path], fmt: Optional[SourceFormat] = None) -> RasterImage:
    path = Path(path)
    data = path.read_bytes()
    fmt = fmt or detect_format(path, data)
    logger.info("Loading image path=%s format=%s bytes=%s", path, fmt.value, len(data))
    return load_image(data, fmt)


def _open_pillow(data: bytes) -> Image.Image:
    try:
        return Image.open(io.BytesIO(data))
    except (UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise MalformedHeader(str(exc)) from exc


def _load_pgm(data: bytes) -> RasterImage:
    if not data.startswith(PGM_MAGIC):
        raise MalformedHeader(f"expected PGM magic {PGM_MAGIC!r}, got {data[:2]!r}")
    im = _open_pillow(data)
    if im.mode != "L":
        raise UnsupportedFeature(f"only 8-bit PGM (maxval 255) is supported, got mode {im.mode}")
    width, height = im.size
    offset = im.tile[0][2] if im.tile else 0
    declared = offset + width * height
    if len(data) < declared:
        raise TruncatedPixelData(
            f"PGM declares {width * height} pixels but holds {max(len(data) - offset, 0)} bytes"
        )
    im.load()
    return RasterImage.from_array(np.asarray(im, dtype=np.float64), SourceFormat.pgm)


def _load_png(data: bytes) -> RasterImage:
    if not data.startswith(PNG_MAGIC):
        raise MalformedHeader("PNG signature mismatch")
    im = _open_pillow(data)
    if im.mode == "P" and "transparency" not in im.info:
        im = im.convert("RGB")
    elif im.mode == "1":
        im = im.convert("L")
    if im.mode in ("LA", "RGBA", "PA", "P"):
        raise UnsupportedFeature(f"PNG with alpha is not supported (mode {im.mode})")
    if im.mode not in ("L", "RGB"):
        raise UnsupportedFeature(f"only 8-bit gray or RGB PNG is supported, got mode {im.mode}")
    try:
        im.load()
    except OSError as exc:
        raise TruncatedPixelData(str(exc)) from exc
    return RasterImage.from_array(np.asarray(im, dtype=np.float64), SourceFormat.png)


def _load_dicom(data: bytes) -> RasterImage:
    if data[DICOM_PREAMBLE_LENGTH : DICOM_PREAMBLE_LENGTH + 4] != DICOM_MAGIC:
        raise MalformedHeader("DICOM preamble is not followed by 'DICM'")
    try:
        ds = pydicom.dcmread(io.BytesIO(data))
    except (InvalidDicomError, EOFError, OSError) as exc:
        raise MalformedHeader(str(exc)) from exc

    file_meta = getattr(ds, "file_meta", None)
    transfer_syntax = file_meta.get("TransferSyntaxUID") if file_meta is not None else None
    if transfer_syntax is None:
        raise MalformedHeader("file meta information lacks a transfer syntax")
    if transfer_syntax != ExplicitVRLittleEndian:
        raise UnsupportedFeature(
            f"transfer syntax {transfer_syntax} is not supported; only uncompressed "
            "Explicit VR Little Endian is read"
        )

    for keyword in ("Rows", "Columns", "BitsAllocated", "PixelData"):
        if keyword not in ds:
            raise MalformedHeader(f"required element {keyword} is missing")

    rows, cols, bits = int(ds.Rows), int(ds.Columns), int(ds.BitsAllocated)
    if bits not in (8, 16):
        raise UnsupportedFeature(f"BitsAllocated={bits} is not supported (8 or 16 only)")
    photometric = str(ds.get("PhotometricInterpretation", "MONOCHROME2")).strip()
    if photometric not in ("MONOCHROME1", "MONOCHROME2"):
        raise UnsupportedFeature(f"photometric interpretation {photometric} is not supported")
    frames = int(ds.get("NumberOfFrames", 1) or 1)
    if frames > 1:
        raise UnsupportedFeature(f"NumberOfFrames={frames}; only single-frame images are read")
    if int(ds.get("PixelRepresentation", 0)) != 0:
        raise UnsupportedFeature("signed pixel data (PixelRepresentation=1) is not supported")

    raw = ds.PixelData
    expected = rows * cols * (bits // 8)
    if len(raw) < expected:
        raise TruncatedPixelData(f"PixelData holds {len(raw)} bytes, {expected} declared")

    dtype = "<u1" if bits == 8 else "<u2"
    values = np.frombuffer(raw[:expected], dtype=dtype).astype(np.float64).reshape(rows, cols)
    if bits == 16:
        values = np.rint(values * 255.0 / 65535.0)
    if photometric == "MONOCHROME1":
        logger.warning("Inverting MONOCHROME1 pixel data rows=%s cols=%s", rows, cols)
        values = 255.0 - values
    return RasterImage.from_array(values, SourceFormat.dicom_subset)


def write_pgm(img: RasterImage) -> bytes:
    """Encode a single-channel image as binary PGM (P5, maxval 255)."""
    if not img.is_gray:
        raise ValueError("PGM output requires a single-channel image")
    plane = np.clip(np.rint(img.plane), 0, 255).astype(np.uint8)
    buffer = io.BytesIO()
    Image.fromarray(plane).save(buffer, format="PPM")
    return buffer.getvalue()


def to_grayscale(img: RasterImage) -> RasterImage:
    if img.is_gray:
        return img
    r, g, b = (img.pixels[:, :, i] for i in range(3))
    gray = np.rint(LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b)
    return RasterImage.from_array(np.clip(gray, 0.0, 255.0), img.source_format)


def _resample(pixels: np.ndarray) -> np.ndarray:
    height, width, channels = pixels.shape
    if (height, width) == (GRID_SIZE, GRID_SIZE):
        return pixels.copy()
    # align-corners grid: output index i samples source coordinate i * (N - 1) / 255
    rows = np.linspace(0.0, height - 1, GRID_SIZE)
    cols = np.linspace(0.0, width - 1, GRID_SIZE)
    coords = np.meshgrid(rows, cols, indexing="ij")
    out = np.empty((GRID_SIZE, GRID_SIZE, channels), dtype=np.float64)
    for channel in range(channels):
        out[:, :, channel] = ndimage.map_coordinates(
            pixels[:, :, channel], coords, order=1, mode="nearest"
        )
    return out


def normalize_image(img: RasterImage) -> NormalizedImage:
    """Resample to the 256x256 analysis grid and min-max rescale to [0, 255]."""
    grid = _resample(img.pixels)
    lo, hi = float(grid.min()), float(grid.max())
    if hi == lo:
        grid = np.zeros_like(grid)
    elif (lo, hi) != (0.0, 255.0):
        grid = np.clip((grid - lo) / (hi - lo) * 255.0, 0.0, 255.0)
    logger.debug(
        "Normalized image source=%sx%s lo=%s hi=%s", img.width, img.height, lo, hi
    )
    return NormalizedImage(RasterImage.from_array(grid, img.source_format), hi > lo)
