from .masks import (
    render_confusion_mask,
    render_probability_mask,
    render_rgb,
    render_stage2_mask,
    save_rendering,
)

__all__ = [
    "render_confusion_mask",
    "render_probability_mask",
    "render_rgb",
    "render_stage2_mask",
    "save_rendering",
]
