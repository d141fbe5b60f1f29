# stdlib
import io

# third party
import numpy as np
import pytest
from PIL import Image
from pydicom.uid import ImplicitVRLittleEndian

# first party
from exceptions import MalformedHeader, TruncatedPixelData, UnsupportedFeature
from image_io import (
    detect_format,
    load_image,
    load_image_file,
    normalize_image,
    to_grayscale,
    write_pgm,
)
from schema import RasterImage, SourceFormat


def _png_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(array).save(buffer, format="PNG")
    return buffer.getvalue()


class TestLoadPgm:
    def test_byte_map(self):
        img = load_image(b"P5 2 2 255\n" + bytes([0, 85, 170, 255]), SourceFormat.pgm)
        assert (img.width, img.height, img.channels) == (2, 2, 1)
        assert img.plane.tolist() == [[0.0, 85.0], [170.0, 255.0]]
        assert img.source_format == SourceFormat.pgm

    def test_truncated(self):
        with pytest.raises(TruncatedPixelData):
            load_image(b"P5\n2 2\n255\n" + bytes([0, 1]), SourceFormat.pgm)

    def test_bad_magic(self):
        with pytest.raises(MalformedHeader):
            load_image(b"P2\n2 2\n255\n0 1 2 3\n", SourceFormat.pgm)

    def test_empty(self):
        with pytest.raises(MalformedHeader):
            load_image(b"", SourceFormat.pgm)

    def test_write_header_is_exact(self):
        img = RasterImage.from_array(np.array([[0, 85], [170, 255]]))
        assert write_pgm(img) == b"P5\n2 2\n255\n" + bytes([0, 85, 170, 255])

    def test_round_trip_is_bit_identical(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            height, width = rng.integers(1, 40, size=2)
            pixels = rng.integers(0, 256, size=(height, width))
            data = write_pgm(RasterImage.from_array(pixels))
            assert write_pgm(load_image(data, SourceFormat.pgm)) == data


class TestLoadDicom:
    def test_sixteen_bit_rescale(self, make_dicom):
        data = make_dicom(np.full((4, 4), 1024))
        img = load_image(data, SourceFormat.dicom_subset)
        assert (img.width, img.height, img.channels) == (4, 4, 1)
        assert np.all(img.plane == 4.0)

    def test_eight_bit_values_kept(self, make_dicom):
        pixels = np.arange(16).reshape(4, 4) * 10
        img = load_image(make_dicom(pixels, bits=8), SourceFormat.dicom_subset)
        assert np.array_equal(img.plane, pixels)

    def test_monochrome1_inverted(self, make_dicom):
        pixels = np.array([[0, 255], [100, 55]])
        img = load_image(make_dicom(pixels, bits=8, photometric="MONOCHROME1"), SourceFormat.dicom_subset)
        assert img.plane.tolist() == [[255.0, 0.0], [155.0, 200.0]]

    def test_truncated_pixel_data(self, make_dicom):
        data = make_dicom(np.zeros((4, 4)), pixel_bytes=bytes(8))
        with pytest.raises(TruncatedPixelData):
            load_image(data, SourceFormat.dicom_subset)

    def test_other_transfer_syntax(self, make_dicom):
        data = make_dicom(np.zeros((4, 4)), transfer_syntax=ImplicitVRLittleEndian)
        with pytest.raises(UnsupportedFeature):
            load_image(data, SourceFormat.dicom_subset)

    def test_multi_frame_rejected(self, make_dicom):
        data = make_dicom(np.zeros((4, 4)), frames=2)
        with pytest.raises(UnsupportedFeature, match="NumberOfFrames=2"):
            load_image(data, SourceFormat.dicom_subset)

    def test_signed_pixels_rejected(self, make_dicom):
        data = make_dicom(np.full((4, 4), -5), signed=True)
        with pytest.raises(UnsupportedFeature, match="PixelRepresentation"):
            load_image(data, SourceFormat.dicom_subset)

    def test_missing_preamble(self):
        with pytest.raises(MalformedHeader):
            load_image(bytes(200), SourceFormat.dicom_subset)


class TestLoadPng:
    def test_rgb(self):
        pixels = np.array([[[255, 0, 0], [0, 255, 0]]], dtype=np.uint8)
        img = load_image(_png_bytes(pixels), SourceFormat.png)
        assert img.channels == 3
        assert img.pixels[0, 0].tolist() == [255.0, 0.0, 0.0]

    def test_alpha_rejected(self):
        pixels = np.zeros((2, 2, 4), dtype=np.uint8)
        with pytest.raises(UnsupportedFeature):
            load_image(_png_bytes(pixels), SourceFormat.png)


def test_format_detection(tmp_path, make_dicom):
    pgm = b"P5\n1 1\n255\n" + bytes([9])
    assert detect_format("scan.pgm", b"") == SourceFormat.pgm
    assert detect_format("scan.bin", pgm) == SourceFormat.pgm
    assert detect_format("scan.bin", make_dicom(np.zeros((2, 2)))) == SourceFormat.dicom_subset
    with pytest.raises(MalformedHeader):
        detect_format("scan.bin", b"nothing here")

    path = tmp_path / "scan"
    path.write_bytes(pgm)
    assert load_image_file(path).plane.tolist() == [[9.0]]


class TestGrayscale:
    def test_luma(self):
        img = RasterImage.from_array(np.array([[[255, 255, 255], [255, 0, 0]]]))
        assert to_grayscale(img).plane.tolist() == [[255.0, 76.0]]

    def test_gray_input_unchanged(self):
        img = RasterImage.from_array(np.array([[1.5, 2.0]]))
        assert to_grayscale(img) is img

    def test_random_triples_within_rounding(self):
        rng = np.random.default_rng(0)
        triples = rng.integers(0, 256, size=(1, 1000, 3)).astype(np.float64)
        gray = to_grayscale(RasterImage.from_array(triples)).plane[0]
        luma = triples[0] @ np.array([0.299, 0.587, 0.114])
        assert np.all((gray >= 0) & (gray <= 255))
        assert np.all(np.abs(gray - luma) <= 0.5 + 1e-9)


class TestNormalize:
    def test_identity_on_full_range_grid(self):
        rng = np.random.default_rng(1)
        pixels = rng.integers(0, 256, size=(256, 256)).astype(np.float64)
        pixels[0, 0], pixels[0, 1] = 0.0, 255.0
        out = normalize_image(RasterImage.from_array(pixels))
        assert np.array_equal(out.plane, pixels)

    def test_bilinear_corners(self):
        out = normalize_image(RasterImage.from_array(np.array([[0, 0], [100, 100]])))
        assert out.grid.width == out.grid.height == 256
        plane = out.plane
        corners = [plane[0, 0], plane[0, 255], plane[255, 0], plane[255, 255]]
        assert corners == pytest.approx([0.0, 0.0, 255.0, 255.0], abs=1e-9)
        # row i samples source row i/255, so the ramp is linear
        assert plane[128, 7] == pytest.approx(128.0, abs=1e-9)
        assert out.intensity_rescaled

    def test_constant_maps_to_zero(self):
        out = normalize_image(RasterImage.from_array(np.full((3, 5), 42.0)))
        assert np.all(out.plane == 0.0)
        assert not out.intensity_rescaled

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        img = RasterImage.from_array(rng.uniform(10, 200, size=(37, 91, 3)))
        once = normalize_image(img)
        twice = normalize_image(once.grid)
        assert np.array_equal(once.grid.pixels, twice.grid.pixels)
        assert once.grid.pixels.min() == 0.0
        assert once.grid.pixels.max() == 255.0
