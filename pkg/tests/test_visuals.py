import numpy as np
import pytest
from PIL import Image

# Ensure src is in path for imports if running pytest from project root
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / 'src'))

from aquifer.errors import ShapeError, ValidationError
from aquifer.raster_io import STAGE2_PALETTE, Mask, MultibandImage, ProbabilityMask
from aquifer.visuals import (
    render_confusion_mask,
    render_probability_mask,
    render_rgb,
    render_stage2_mask,
    save_rendering,
)


def test_confusion_colours():
    pred = np.array([[1, 0, 1, 0]])
    truth = np.array([[1, 0, 0, 1]])
    image = render_confusion_mask(pred, truth)
    assert image.mode == "RGB"
    assert image.size == (4, 1)
    assert [image.getpixel((x, 0)) for x in range(4)] == [(255, 0, 0), (0, 0, 0), (0, 255, 0), (0, 0, 255)]


def test_confusion_accepts_masks():
    pred = Mask(values=np.array([[255]], dtype=np.uint8))
    assert render_confusion_mask(pred, pred).getpixel((0, 0)) == (255, 0, 0)


def test_confusion_shape_mismatch():
    with pytest.raises(ShapeError):
        render_confusion_mask(np.zeros((2, 2)), np.zeros((2, 3)))


def test_stage2_colours():
    values = np.array([[0, 128, 255]], dtype=np.uint8)
    truth = render_stage2_mask(Mask(values=values, palette=STAGE2_PALETTE), mode="truth")
    assert [truth.getpixel((x, 0)) for x in range(3)] == [(0, 0, 0), (128, 128, 128), (255, 255, 255)]
    prediction = render_stage2_mask(values, mode="prediction")
    assert [prediction.getpixel((x, 0)) for x in range(3)] == [(0, 0, 0), (255, 0, 0), (255, 255, 0)]


def test_stage2_rejects_bad_input():
    with pytest.raises(ValidationError, match="not a stage-2 label"):
        render_stage2_mask(np.array([[0, 64]], dtype=np.uint8))
    with pytest.raises(ValidationError, match="mode"):
        render_stage2_mask(np.zeros((1, 1), dtype=np.uint8), mode="overlay")


def test_probability_rendering():
    probs = ProbabilityMask(probs=np.array([[0.0, 0.5, 1.0]], dtype=np.float32))
    image = render_probability_mask(probs)
    assert [image.getpixel((x, 0)) for x in range(3)] == [(0, 0, 0), (128, 128, 128), (255, 255, 255)]


def test_rgb_composite(rng):
    data = rng.uniform(0, 1, size=(8, 6, 5)).astype(np.float32)
    image = render_rgb(MultibandImage(data=data))
    assert image.size == (5, 6)
    pixels = np.asarray(image)
    assert pixels.min() == 0 and pixels.max() == 255
    flat = render_rgb(MultibandImage(data=np.ones((8, 2, 2), dtype=np.float32)))
    assert not np.asarray(flat).any()
    with pytest.raises(ValidationError):
        render_rgb(MultibandImage(data=data), bands=(0, 1))


def test_saved_rendering_is_binary_ppm(tmp_path):
    path = tmp_path / "confusion.ppm"
    save_rendering(render_confusion_mask(np.eye(3), np.eye(3)), path)
    assert path.read_bytes().startswith(b"P6")
    with Image.open(path) as reloaded:
        assert reloaded.mode == "RGB"
        assert reloaded.getpixel((1, 1)) == (255, 0, 0)
        assert reloaded.getpixel((0, 1)) == (0, 0, 0)
