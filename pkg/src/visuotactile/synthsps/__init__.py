"""Synthetic stand-in for the multiview visuo-tactile material dataset."""

from .dataset import (
    ArrayDataset,
    DatasetError,
    SPSDataset,
    VisuoTactilePair,
    generate_arrays,
    generate_dataset,
    load_dataset,
    read_sample,
    split_ids,
    write_sample,
)
from .generator import (
    PRESETS,
    GenConfig,
    MaterialSample,
    draw_tactile,
    informative_band,
    material_from_tactile,
    mean_specular_profile,
    measure_tactile,
    preset,
    render_sequence,
    render_view,
    sample_material,
    surface_layers,
    view_angles,
)
from .registry import ACRONYMS, PROPERTIES, TOP8, TactileProperty, index_of

__all__ = [name for name in dir() if not name.startswith("_")]
