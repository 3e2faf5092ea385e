"""On-disk dataset format, generation driver, and loader.

Layout of a dataset directory::

    manifest.json        format_version, sizes, property order, split, seed, config
    sample_<id>.vtp      little-endian binary, see ``write_sample``
"""

import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .generator import GenConfig, measure_tactile, render_sequence, sample_material, view_angles
from .registry import ACRONYMS, NUM_PROPERTIES, PROPERTIES

FORMAT_VERSION = 1
MAGIC = b"VTP1"
REPEATS = 5


class DatasetError(Exception):
    """Raised for unreadable, inconsistent or incompatible dataset files."""


@dataclass
class VisuoTactilePair:
    sample_id: int
    images: np.ndarray        # (N, H, W, 3) float32
    angles: np.ndarray        # (N,) float32, degrees
    measurements: np.ndarray  # (5, 15) float32
    split: str

    @property
    def target(self):
        return self.measurements.astype(np.float64).mean(axis=0)


def sample_filename(sample_id):
    return f"sample_{sample_id:04d}.vtp"


def write_sample(path, images, angles, measurements):
    images = np.ascontiguousarray(images, dtype="<f4")
    n, h, w, c = images.shape
    if c != 3:
        raise ValueError("images must have 3 channels")
    angles = np.ascontiguousarray(angles, dtype="<f4")
    meas = np.ascontiguousarray(measurements, dtype="<f4")
    if meas.shape != (REPEATS, NUM_PROPERTIES):
        raise ValueError(f"measurement matrix must be {REPEATS}x{NUM_PROPERTIES}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", n, h, w))
        fh.write(images.tobytes())
        fh.write(struct.pack("<I", angles.size))
        fh.write(angles.tobytes())
        fh.write(meas.tobytes())


def read_sample(path, expect=None):
    """Parse one ``.vtp`` file; ``expect`` optionally pins (N, H, W)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if raw[:4] != MAGIC:
        raise DatasetError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 16:
        raise DatasetError(f"{path}: truncated header")
    n, h, w = struct.unpack_from("<III", raw, 4)
    if expect is not None and (n, h, w) != tuple(expect):
        raise DatasetError(f"{path}: dimensions {(n, h, w)} do not match manifest {tuple(expect)}")
    img_bytes = n * h * w * 3 * 4
    expected_len = 16 + img_bytes + 4 + 4 * n + 4 * REPEATS * NUM_PROPERTIES
    if len(raw) != expected_len:
        raise DatasetError(f"{path}: size {len(raw)} bytes, expected {expected_len}")
    off = 16
    images = np.frombuffer(raw, dtype="<f4", count=n * h * w * 3, offset=off).reshape(n, h, w, 3)
    off += img_bytes
    (n_angles,) = struct.unpack_from("<I", raw, off)
    if n_angles != n:
        raise DatasetError(f"{path}: angle count {n_angles} != frame count {n}")
    off += 4
    angles = np.frombuffer(raw, dtype="<f4", count=n, offset=off)
    off += 4 * n
    meas = np.frombuffer(raw, dtype="<f4", count=REPEATS * NUM_PROPERTIES, offset=off)
    meas = meas.reshape(REPEATS, NUM_PROPERTIES)
    if not (np.all(np.isfinite(images)) and np.all(images >= 0) and np.all(images <= 1)):
        raise DatasetError(f"{path}: image values outside [0, 1]")
    if not (np.all(np.isfinite(meas)) and np.all(meas >= 0) and np.all(meas <= 100)):
        raise DatasetError(f"{path}: tactile values outside [0, 100]")
    if not np.array_equal(angles, view_angles(n).astype(np.float32)):
        raise DatasetError(f"{path}: view angles are not evenly spaced over [-45, 45]")
    return images.astype(np.float32), angles.astype(np.float32), meas.astype(np.float32)


def split_ids(num_samples, seed):
    """Seeded 90/10 split; validation gets floor(10%) but at least one sample."""
    n_val = max(1, num_samples // 10)
    order = np.random.default_rng(np.random.SeedSequence([seed, 0x5917])).permutation(num_samples)
    return sorted(int(i) for i in order[n_val:]), sorted(int(i) for i in order[:n_val])


def material_seed(seed, index):
    return np.random.SeedSequence([seed, index])


def generate_sample(config, seed, index):
    """Pure function of (config, seed, index) -> (material, images, angles, measurements)."""
    ss = material_seed(seed, index)
    mat_ss, meas_ss = ss.spawn(2)
    material = sample_material(np.random.default_rng(mat_ss), config)
    angles = view_angles(config.num_views)
    images = render_sequence(material, angles, config.image_size, config.pixel_noise)
    meas = measure_tactile(material, np.random.default_rng(meas_ss), config.sigma_meas, REPEATS)
    return material, images, angles, meas


def generate_dataset(config, seed, path):
    config = config.validate() if isinstance(config, GenConfig) else GenConfig(**config).validate()
    if config.num_samples < 10:
        raise ValueError("a dataset needs at least 10 samples")
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"{path}: cannot create dataset directory ({exc})") from None
    train, val = split_ids(config.num_samples, seed)
    categories = {}
    for i in range(config.num_samples):
        material, images, angles, meas = generate_sample(config, seed, i)
        categories[str(i)] = material.category
        try:
            write_sample(path / sample_filename(i), images, angles, meas)
        except OSError as exc:
            raise DatasetError(f"{path / sample_filename(i)}: {exc}") from None
    manifest = {
        "format_version": FORMAT_VERSION,
        "num_samples": config.num_samples,
        "views_per_sample": config.num_views,
        "image_height": config.image_size,
        "image_width": config.image_size,
        "property_acronyms": list(ACRONYMS),
        "split": {"train": train, "val": val},
        "seed": seed,
        "gen_config": config.to_dict(),
        "material_categories": categories,
    }
    try:
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"{path / 'manifest.json'}: {exc}") from None
    return path


class SPSDataset:
    """Lazy reader over a dataset directory. Samples are validated when read."""

    def __init__(self, path):
        self.path = Path(path)
        mpath = self.path / "manifest.json"
        try:
            manifest = json.loads(mpath.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise DatasetError(f"{mpath}: {exc}") from None
        if manifest.get("format_version") != FORMAT_VERSION:
            raise DatasetError(f"{mpath}: unsupported format_version {manifest.get('format_version')!r}")
        try:
            self.num_samples = int(manifest["num_samples"])
            self.num_views = int(manifest["views_per_sample"])
            self.height = int(manifest["image_height"])
            self.width = int(manifest["image_width"])
            self.acronyms = tuple(manifest["property_acronyms"])
            self.train_ids = [int(i) for i in manifest["split"]["train"]]
            self.val_ids = [int(i) for i in manifest["split"]["val"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"{mpath}: malformed manifest ({exc!r})") from None
        if len(self.acronyms) != NUM_PROPERTIES:
            raise DatasetError(f"{mpath}: expected {NUM_PROPERTIES} property acronyms")
        if not self.val_ids or not self.train_ids:
            raise DatasetError(f"{mpath}: both train and val splits must be non-empty")
        ids = self.train_ids + self.val_ids
        if sorted(ids) != list(range(self.num_samples)):
            raise DatasetError(f"{mpath}: split does not partition the {self.num_samples} samples")
        self.manifest = manifest
        self.registry = PROPERTIES
        self._split = {i: "train" for i in self.train_ids}
        self._split.update({i: "val" for i in self.val_ids})

    def __len__(self):
        return self.num_samples

    def __getitem__(self, sample_id):
        if sample_id not in self._split:
            raise IndexError(sample_id)
        images, angles, meas = read_sample(self.path / sample_filename(sample_id),
                                           (self.num_views, self.height, self.width))
        return VisuoTactilePair(sample_id, images, angles, meas, self._split[sample_id])

    def __iter__(self):
        for i in range(self.num_samples):
            yield self[i]

    def to_arrays(self):
        return ArrayDataset.from_pairs(list(self), self.train_ids, self.val_ids, self.acronyms)


def load_dataset(path):
    return SPSDataset(path)


@dataclass
class ArrayDataset:
    """In-memory dataset: the form every trainer consumes."""

    images: np.ndarray        # (S, N, H, W, 3)
    angles: np.ndarray        # (N,)
    measurements: np.ndarray  # (S, 5, 15)
    train_ids: np.ndarray
    val_ids: np.ndarray
    acronyms: tuple = ACRONYMS

    @classmethod
    def from_pairs(cls, pairs, train_ids, val_ids, acronyms=ACRONYMS):
        pairs = sorted(pairs, key=lambda p: p.sample_id)
        return cls(
            images=np.stack([p.images for p in pairs]),
            angles=pairs[0].angles.copy(),
            measurements=np.stack([p.measurements for p in pairs]),
            train_ids=np.asarray(train_ids, dtype=np.int64),
            val_ids=np.asarray(val_ids, dtype=np.int64),
            acronyms=tuple(acronyms),
        )

    @property
    def targets(self):
        """Per-sample training target: mean over the repeated measurements."""
        return self.measurements.astype(np.float64).mean(axis=1)

    @property
    def num_views(self):
        return self.images.shape[1]

    @property
    def nadir_index(self):
        return int(np.argmin(np.abs(self.angles)))

    def subset(self, n_train, n_val=None):
        """Smaller dataset sharing arrays (for smoke runs)."""
        tr = self.train_ids[:n_train]
        va = self.val_ids[: (n_val if n_val is not None else max(1, n_train // 9))]
        return ArrayDataset(self.images, self.angles, self.measurements, tr, va, self.acronyms)


@lru_cache(maxsize=2)
def _cached_generate(config_items, seed):
    d = dict(config_items)
    d["beta"] = dict(d["beta"])
    config = GenConfig.from_dict(d)
    pairs = []
    train, val = split_ids(config.num_samples, seed)
    vals = set(val)
    for i in range(config.num_samples):
        _, images, angles, meas = generate_sample(config, seed, i)
        pairs.append(VisuoTactilePair(i, images, angles.astype(np.float32), meas.astype(np.float32),
                                      "val" if i in vals else "train"))
    return ArrayDataset.from_pairs(pairs, train, val)


def generate_arrays(config, seed):
    """Generate straight to memory (same values as a write/read round trip)."""
    d = config.to_dict()
    d["beta"] = tuple((k, tuple(v)) for k, v in d["beta"].items())
    return _cached_generate(tuple(sorted(d.items())), seed)
