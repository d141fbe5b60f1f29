# stdlib
import json
from typing import Any, Dict, List, Sequence, Tuple, Union

# third party
import numpy as np
from pydantic import ValidationError

# first party
from exceptions import EmptyInput, InvalidSpec
from helpers import encode_json, get_logger
from schema import (
    BRAIN_CENTER,
    BRAIN_SEMI_AXES,
    GRID_SIZE,
    MIDLINE_COL,
    AccuracyReport,
    FocusReport,
    LesionMode,
    NormalizedImage,
    PhantomSpec,
    Side,
)

logger = get_logger(__name__)

PEAK_INTENSITY = 200.0
PROFILE_FALLOFF = 0.4
TEXTURE_PAIRS = 12
TEXTURE_SIGMA = 6.0
TEXTURE_AMPLITUDE = 15.0
MIDLINE_MARGIN = 4


def _brain_profile() -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = np.mgrid[0:GRID_SIZE, 0:GRID_SIZE].astype(np.float64)
    (r0, c0), (a, b) = BRAIN_CENTER, BRAIN_SEMI_AXES
    rho2 = ((rows - r0) / a) ** 2 + ((cols - c0) / b) ** 2
    inside = rho2 <= 1.0
    base = np.where(inside, PEAK_INTENSITY * (1.0 - PROFILE_FALLOFF * rho2), 0.0)
    return rows, cols, inside, base


def _texture(rng: np.random.Generator, rows: np.ndarray, cols: np.ndarray, inside: np.ndarray) -> np.ndarray:
    """Gaussian blobs in the left hemisphere, each paired with its mirror image."""
    (r0, c0), (a, b) = BRAIN_CENTER, BRAIN_SEMI_AXES
    texture = np.zeros_like(rows)
    for _ in range(TEXTURE_PAIRS):
        while True:
            row = rng.uniform(r0 - a, r0 + a)
            col = rng.uniform(c0 - b, c0)
            if ((row - r0) / a) ** 2 + ((col - c0) / b) ** 2 <= 1.0:
                break
        amplitude = rng.uniform(-TEXTURE_AMPLITUDE, TEXTURE_AMPLITUDE)
        for center_col in (col, 2 * MIDLINE_COL - col):
            d2 = (rows - row) ** 2 + (cols - center_col) ** 2
            texture += amplitude * np.exp(-d2 / (2.0 * TEXTURE_SIGMA**2))
    return np.where(inside, texture, 0.0)


def _enforce_symmetry(image: np.ndarray) -> np.ndarray:
    # columns 129..255 become exact copies of 127..1
    image[:, MIDLINE_COL + 1 :] = image[:, MIDLINE_COL - 1 : 0 : -1]
    return image


def lesion_disc(spec: PhantomSpec) -> np.ndarray:
    rows, cols = np.mgrid[0:GRID_SIZE, 0:GRID_SIZE]
    r0, c0 = spec.lesion_center
    return (rows - r0) ** 2 + (cols - c0) ** 2 <= spec.lesion_radius**2


def _as_spec(spec: Union[PhantomSpec, Dict[str, Any]]) -> PhantomSpec:
    if isinstance(spec, PhantomSpec):
        return spec
    try:
        return PhantomSpec.model_validate(spec)
    except ValidationError as e:
        raise InvalidSpec(str(e)) from e


def generate_phantom(spec: Union[PhantomSpec, Dict[str, Any]]) -> Tuple[NormalizedImage, PhantomSpec]:
    """
    Synthetic 256x256 brain slice with a known lesion.

    The brain is an ellipse with a radial intensity profile peaking at 200,
    overlaid with mirror-symmetric texture. A lesion scales the disc by
    (1 - contrast), or adds contrast * 200 in additive mode. Gaussian noise is
    added last and the result clipped to [0, 255]. The image is a pure
    function of its PhantomSpec: the seed drives the texture and the noise,
    which are drawn the same way whether or not a lesion is present.
    """
    spec = _as_spec(spec)
    rng = np.random.default_rng(spec.seed)
    rows, cols, inside, base = _brain_profile()
    image = _enforce_symmetry(np.clip(base + _texture(rng, rows, cols, inside), 0.0, 255.0))
    noise = rng.standard_normal(image.shape)

    if spec.lesion_present:
        disc = lesion_disc(spec)
        if spec.lesion_mode == LesionMode.deficit:
            image = np.where(disc, image * (1.0 - spec.lesion_contrast), image)
        else:
            image = np.where(disc, image + spec.lesion_contrast * PEAK_INTENSITY, image)
    if spec.noise_sigma > 0.0:
        image = image + spec.noise_sigma * noise
    image = np.clip(image, 0.0, 255.0)
    logger.debug(
        "Generated phantom seed=%s lesion_present=%s side=%s center=%s",
        spec.seed,
        spec.lesion_present,
        spec.lesion_side.value,
        spec.lesion_center,
    )
    return NormalizedImage.from_array(image), spec


def mirror_spec(spec: PhantomSpec) -> PhantomSpec:
    """Flip the lesion side and reflect its center about column 128."""
    row, col = spec.lesion_center
    side = Side.right if spec.lesion_side == Side.left else Side.left
    fields = spec.model_dump()
    fields.update(lesion_side=side, lesion_center=(row, 2 * MIDLINE_COL - col))
    return _as_spec(fields)


def _draw_lesion_center(rng: np.random.Generator, side: Side, radius: float) -> Tuple[int, int]:
    (r0, c0), (a, b) = BRAIN_CENTER, BRAIN_SEMI_AXES
    margin = radius + MIDLINE_MARGIN
    while True:
        row = int(rng.integers(int(r0 - a + radius), int(r0 + a - radius) + 1))
        offset = int(rng.integers(int(np.ceil(margin)), int(b - radius) + 1))
        col = c0 - offset if side == Side.left else c0 + offset
        # the whole disc stays inside the ellipse
        if ((row - r0) / (a - radius)) ** 2 + ((col - c0) / (b - radius)) ** 2 <= 1.0:
            return row, col


def random_phantom_specs(
    n: int,
    seed: int,
    *,
    lesion_radius: float = 10.0,
    lesion_contrast: float = 0.3,
    noise_sigma: float = 5.0,
    lesion_mode: LesionMode = LesionMode.deficit,
) -> List[PhantomSpec]:
    """
    Batch of ``n`` specs alternating lesioned and clean trials, starting with
    a lesioned one. Sides and centers are random; per-trial seeds derive from
    ``seed``.
    """
    if n < 1:
        raise InvalidSpec(f"batch size must be positive, got {n}")
    rng = np.random.default_rng(seed)
    trial_seeds = np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)
    specs = []
    for i in range(n):
        side = Side.left if rng.random() < 0.5 else Side.right
        center = _draw_lesion_center(rng, side, lesion_radius)
        fields = dict(
            seed=int(trial_seeds[i]),
            lesion_present=i % 2 == 0,
            lesion_side=side,
            lesion_center=center,
            lesion_radius=lesion_radius,
            lesion_contrast=lesion_contrast,
            noise_sigma=noise_sigma,
            lesion_mode=lesion_mode,
        )
        specs.append(_as_spec(fields))
    logger.info("Drew phantom specs n=%s seed=%s", n, seed)
    return specs


def write_spec_batch(specs: Sequence[PhantomSpec]) -> bytes:
    return encode_json([spec.model_dump(mode="json") for spec in specs])


def read_spec_batch(data: bytes) -> List[PhantomSpec]:
    try:
        records = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InvalidSpec(f"spec batch is not valid JSON: {e}") from e
    if not isinstance(records, list):
        raise InvalidSpec("spec batch must be a JSON array")
    if not records:
        raise EmptyInput("spec batch is empty")
    return [_as_spec(record) for record in records]


def evaluate_detections(pairs: Sequence[Tuple[FocusReport, PhantomSpec]]) -> AccuracyReport:
    """
    Confusion counts of detections against ground truth.

    A lesioned trial is a true positive only when the reported side matches
    the lesion side; any other report on it is a false negative. A clean
    trial is a true negative when nothing is reported. Localization error is
    the pixel distance between the reported centroid and the lesion center,
    averaged over true positives.
    """
    if not pairs:
        raise EmptyInput("no detections to evaluate")
    tp = fn = tn = fp = 0
    errors = []
    for focus, spec in pairs:
        if spec.lesion_present:
            if focus.side == spec.lesion_side:
                tp += 1
                if focus.centroid is not None:
                    errors.append(float(np.hypot(*np.subtract(focus.centroid, spec.lesion_center))))
            else:
                fn += 1
        elif focus.side == Side.none:
            tn += 1
        else:
            fp += 1

    n = len(pairs)
    report = AccuracyReport(
        n=n,
        accuracy=(tp + tn) / n,
        sensitivity=tp / (tp + fn) if tp + fn else 0.0,
        specificity=tn / (tn + fp) if tn + fp else 0.0,
        mean_localization_error=float(np.mean(errors)) if errors else None,
        true_positives=tp,
        false_negatives=fn,
        true_negatives=tn,
        false_positives=fp,
    )
    logger.info(
        "Evaluated detections n=%s accuracy=%.4f sensitivity=%.4f specificity=%.4f",
        n,
        report.accuracy,
        report.sensitivity,
        report.specificity,
    )
    return report
