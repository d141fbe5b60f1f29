# stdlib
import io
from pathlib import Path
from typing import Optional

# third party
import numpy as np
import pydicom
import pytest
from pydicom.dataset import Dataset, FileMetaDataset
from pydicom.uid import ExplicitVRLittleEndian, SecondaryCaptureImageStorage

# first party
from audit_logger import clear_audit_log
from image_io import write_pgm
from phantom import generate_phantom
from schema import ClusteringConfig, NormalizedImage, PhantomSpec, Side

SOP_INSTANCE_UID = "1.2.826.0.1.3680043.8.498.1"


def build_dicom(
    pixels: np.ndarray,
    bits: int = 16,
    photometric: str = "MONOCHROME2",
    transfer_syntax: str = ExplicitVRLittleEndian,
    pixel_bytes: Optional[bytes] = None,
    frames: int = 1,
    signed: bool = False,
) -> bytes:
    """DICOM file with the elements the loader reads; one frame unless ``frames`` says otherwise."""
    meta = FileMetaDataset()
    meta.MediaStorageSOPClassUID = SecondaryCaptureImageStorage
    meta.MediaStorageSOPInstanceUID = SOP_INSTANCE_UID
    meta.TransferSyntaxUID = transfer_syntax

    ds = Dataset()
    ds.file_meta = meta
    ds.SOPClassUID = SecondaryCaptureImageStorage
    ds.SOPInstanceUID = SOP_INSTANCE_UID
    ds.Modality = "PT"
    ds.Rows, ds.Columns = pixels.shape
    ds.SamplesPerPixel = 1
    ds.PhotometricInterpretation = photometric
    ds.BitsAllocated = bits
    ds.BitsStored = bits
    ds.HighBit = bits - 1
    ds.PixelRepresentation = 1 if signed else 0
    if frames > 1:
        ds.NumberOfFrames = frames
    dtype = ("<i" if signed else "<u") + ("1" if bits == 8 else "2")
    ds.PixelData = pixel_bytes if pixel_bytes is not None else pixels.astype(dtype).tobytes() * frames

    buffer = io.BytesIO()
    pydicom.dcmwrite(buffer, ds, enforce_file_format=True)
    return buffer.getvalue()


@pytest.fixture
def make_dicom():
    return build_dicom


@pytest.fixture(autouse=True)
def fresh_audit_log():
    clear_audit_log()
    yield
    clear_audit_log()


@pytest.fixture
def clustering_config() -> ClusteringConfig:
    return ClusteringConfig(seed=7)


@pytest.fixture
def clean_spec() -> PhantomSpec:
    return PhantomSpec(seed=3)


@pytest.fixture
def left_lesion_spec() -> PhantomSpec:
    return PhantomSpec(
        seed=3,
        lesion_present=True,
        lesion_side=Side.left,
        lesion_center=(120, 90),
        lesion_radius=10.0,
        lesion_contrast=0.3,
    )


@pytest.fixture
def symmetric_image(clean_spec) -> NormalizedImage:
    img, _ = generate_phantom(clean_spec)
    return img


@pytest.fixture
def left_lesion_image(left_lesion_spec) -> NormalizedImage:
    img, _ = generate_phantom(left_lesion_spec)
    return img


@pytest.fixture
def scan_file(tmp_path, left_lesion_image) -> Path:
    path = tmp_path / "scan.pgm"
    path.write_bytes(write_pgm(left_lesion_image.grid))
    return path


@pytest.fixture
def normal_scan_file(tmp_path, symmetric_image) -> Path:
    path = tmp_path / "normal.pgm"
    path.write_bytes(write_pgm(symmetric_image.grid))
    return path
