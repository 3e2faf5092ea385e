"""Procedural multiview materials with controlled tactile -> appearance couplings.

Each tactile property drives one render parameter:

==========  ==========================================================
mTX         macro relief amplitude (proportional, 0 gives a flat layer)
mCO         macro relief period
mRG         macro phase regularity (low values add phase jitter)
uRO         micro noise amplitude
uCO         micro noise frequency
fST         specular gain
fRS         specular lobe width, angular and spatial (higher -> narrower)
cCM..cYD    vignette softness (their mean)
tCO, tPR    base hue (warm -> cool)
aTK         nothing; it is invisible by construction
==========  ==========================================================

Property values are drawn through a Gaussian copula: properties in the same
category share a latent factor (``category_correlation``) while marginals
stay Beta. aTK is its own category and therefore independent.
"""

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .registry import ACRONYMS, PROPERTIES, NUM_PROPERTIES, index_of

MATERIAL_LABELS = (
    "fabric", "plastic", "paper", "wood", "leather", "foam", "rubber", "vinyl",
    "carpet", "tile", "stone", "cork", "metal", "glass", "other",
)
_LABEL_WEIGHTS = np.array([18, 14, 10, 9, 8, 6, 6, 5, 5, 4, 4, 3, 3, 2, 3], dtype=float)

# Beta(a, b) shape per property, loosely echoing the spread of real measurements.
DEFAULT_BETA = {
    "fRS": (2.0, 3.0), "fST": (2.5, 2.5), "uCO": (2.0, 2.0), "uRO": (2.0, 3.0),
    "mRG": (2.0, 2.0), "mCO": (2.0, 2.5), "mTX": (2.0, 3.5), "tCO": (3.0, 3.0),
    "tPR": (3.0, 3.0), "cCM": (2.0, 3.0), "cDF": (2.0, 3.0), "cDP": (3.0, 2.0),
    "cRX": (2.0, 2.0), "cYD": (2.0, 4.0), "aTK": (1.5, 6.0),
}

ANGLE_MIN, ANGLE_MAX = -45.0, 45.0
SPEC_CENTER_RANGE = (5.0, 35.0)
SPEC_WIDTH_RANGE = (4.0, 16.0)
SPEC_GAIN_RANGE = (0.15, 0.6)


@dataclass
class GenConfig:
    num_samples: int = 400
    image_size: int = 32
    num_views: int = 20
    sigma_meas: float = 2.0
    pixel_noise: float = 0.02
    category_correlation: float = 0.6
    beta: dict = field(default_factory=lambda: dict(DEFAULT_BETA))

    def validate(self):
        if self.image_size < 8 or self.image_size > 512:
            raise ValueError(f"image_size must be in [8, 512], got {self.image_size}")
        if self.num_views < 2:
            raise ValueError(f"num_views must be >= 2, got {self.num_views}")
        if self.sigma_meas < 0:
            raise ValueError("sigma_meas must be >= 0")
        if self.pixel_noise < 0:
            raise ValueError("pixel_noise must be >= 0")
        if not 0.0 <= self.category_correlation < 1.0:
            raise ValueError("category_correlation must be in [0, 1)")
        if set(self.beta) != set(ACRONYMS):
            raise ValueError("beta must give shape parameters for all 15 properties")
        for k, (a, b) in self.beta.items():
            if a <= 0 or b <= 0:
                raise ValueError(f"beta shape for {k} must be positive")
        return self

    def to_dict(self):
        d = asdict(self)
        d["beta"] = {k: list(self.beta[k]) for k in ACRONYMS}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "beta" in d:
            d["beta"] = {k: tuple(v) for k, v in d["beta"].items()}
        return cls(**d)

    def expected_means(self):
        return np.array([100.0 * a / (a + b) for a, b in (self.beta[k] for k in ACRONYMS)])


PRESETS = {
    "desk": dict(num_samples=400, image_size=32, num_views=20, sigma_meas=2.0),
    "paper-shape": dict(num_samples=400, image_size=64, num_views=100, sigma_meas=2.0),
    "tiny": dict(num_samples=24, image_size=16, num_views=6, sigma_meas=2.0),
}


def preset(name, **overrides):
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(overrides)
    return GenConfig(**base).validate()


@dataclass
class MaterialSample:
    tactile: np.ndarray
    base_color: np.ndarray
    macro_amplitude: float
    macro_period: float
    macro_jitter: float
    macro_orientation: float
    micro_amplitude: float
    micro_frequency: float
    spec_gain: float
    spec_width: float
    spec_center: float
    vignette_softness: float
    category: str
    seed: int

    def specular_weight(self, angle_deg):
        """View-dependent highlight gain ``s * exp(-(a - c)^2 / (2 w^2))``."""
        d = np.asarray(angle_deg, dtype=np.float64) - self.spec_center
        return self.spec_gain * np.exp(-d * d / (2.0 * self.spec_width ** 2))


def view_angles(num_views):
    k = np.arange(num_views, dtype=np.float64)
    return ANGLE_MIN + (ANGLE_MAX - ANGLE_MIN) * k / (num_views - 1)


def draw_tactile(rng, config):
    """One 15-vector in [0, 100] via the category-correlated Gaussian copula."""
    rho = config.category_correlation
    shared = {c: rng.standard_normal() for c in ("friction", "texture", "thermal", "compliance", "adhesion")}
    own = rng.standard_normal(NUM_PROPERTIES)
    z = np.array([np.sqrt(rho) * shared[p.category] + np.sqrt(1.0 - rho) * own[i]
                  for i, p in enumerate(PROPERTIES)])
    u = stats.norm.cdf(z)
    t = np.array([stats.beta.ppf(u[i], *config.beta[k]) for i, k in enumerate(ACRONYMS)])
    return np.clip(100.0 * t, 0.0, 100.0)


def material_from_tactile(t, rng):
    """Derive render parameters from a tactile vector plus nuisance draws from ``rng``."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (NUM_PROPERTIES,) or np.any(t < 0) or np.any(t > 100):
        raise ValueError("tactile vector must have 15 entries in [0, 100]")
    u = t / 100.0
    v = lambda k: u[index_of(k)]  # noqa: E731

    hue = 0.5 * (v("tCO") + v("tPR"))
    warm = np.array([0.58, 0.42, 0.30])
    cool = np.array([0.30, 0.42, 0.58])
    brightness = rng.uniform(0.85, 1.1)
    base = brightness * ((1.0 - hue) * warm + hue * cool)

    compliance = np.mean([v(k) for k in ("cCM", "cDF", "cDP", "cRX", "cYD")])
    lo_w, hi_w = SPEC_WIDTH_RANGE
    lo_g, hi_g = SPEC_GAIN_RANGE
    return MaterialSample(
        tactile=t.copy(),
        base_color=base,
        macro_amplitude=0.25 * v("mTX"),
        macro_period=0.12 + 0.38 * v("mCO"),
        macro_jitter=np.pi * (1.0 - v("mRG")),
        macro_orientation=rng.uniform(0.0, np.pi),
        micro_amplitude=0.12 * v("uRO"),
        micro_frequency=4.0 + 10.0 * v("uCO"),
        spec_gain=lo_g + (hi_g - lo_g) * v("fST"),
        spec_width=hi_w - (hi_w - lo_w) * v("fRS"),
        spec_center=rng.uniform(*SPEC_CENTER_RANGE),
        vignette_softness=0.03 + 0.37 * compliance,
        category=str(rng.choice(MATERIAL_LABELS, p=_LABEL_WEIGHTS / _LABEL_WEIGHTS.sum())),
        seed=int(rng.integers(0, 2 ** 63 - 1)),
    )


def sample_material(rng, config):
    config.validate()
    return material_from_tactile(draw_tactile(rng, config), rng)


# ---------------------------------------------------------------- rendering

def _grid(size):
    c = (np.arange(size) + 0.5) / size
    return np.meshgrid(c, c, indexing="xy")  # x varies along columns


def _smooth_field(rng, size, cutoff=3):
    """Zero-mean, unit-std low-frequency random field."""
    spec = np.zeros((size, size), dtype=complex)
    k = cutoff + 1
    spec[:k, :k] = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    spec[0, 0] = 0.0
    f = np.fft.ifft2(spec).real
    return (f - f.mean()) / (f.std() + 1e-12)


def surface_layers(material, size):
    """View-independent layers: (albedo HxWx3 with vignette applied, highlight HxW)."""
    rng = np.random.default_rng(material.seed)
    x, y = _grid(size)
    along = x * np.cos(material.macro_orientation) + y * np.sin(material.macro_orientation)
    phase = material.macro_jitter * _smooth_field(rng, size)
    macro = material.macro_amplitude * 0.5 * (1.0 + np.sin(2 * np.pi * along / material.macro_period + phase))

    waves = 6
    dirs = rng.uniform(0.0, np.pi, waves)
    offs = rng.uniform(0.0, 2 * np.pi, waves)
    micro = np.zeros((size, size))
    for d, o in zip(dirs, offs):
        micro += np.sin(2 * np.pi * material.micro_frequency * (x * np.cos(d) + y * np.sin(d)) + o)
    micro *= material.micro_amplitude * np.sqrt(2.0 / waves)

    r = np.maximum(np.abs(x - 0.5), np.abs(y - 0.5)) * 2.0
    vignette = 1.0 - 0.6 / (1.0 + np.exp(-(r - 0.8) / material.vignette_softness))

    albedo = (material.base_color[None, None, :] + (macro + micro)[..., None]) * vignette[..., None]
    # a wider angular lobe also spreads the highlight spatially
    lo_w, hi_w = SPEC_WIDTH_RANGE
    spread = 0.12 + 0.28 * (material.spec_width - lo_w) / (hi_w - lo_w)
    highlight = np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / (2 * spread ** 2))
    return albedo, highlight


def _frame_rng(material, angle_deg):
    bits = int(np.float64(angle_deg).view(np.uint64))
    return np.random.default_rng(np.random.SeedSequence([material.seed & (2 ** 63 - 1), bits]))


def render_view(material, angle_deg, size=32, pixel_noise=0.02, layers=None):
    """Render one HxWx3 image in [0, 1] at the given roll angle (degrees)."""
    if not ANGLE_MIN <= angle_deg <= ANGLE_MAX:
        raise ValueError(f"angle {angle_deg} outside [{ANGLE_MIN}, {ANGLE_MAX}]")
    albedo, highlight = layers if layers is not None else surface_layers(material, size)
    img = albedo + float(material.specular_weight(angle_deg)) * highlight[..., None]
    if pixel_noise > 0:
        img = img + _frame_rng(material, angle_deg).normal(0.0, pixel_noise, img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def render_sequence(material, angles, size=32, pixel_noise=0.02):
    layers = surface_layers(material, size)
    return np.stack([render_view(material, a, size, pixel_noise, layers) for a in angles])


def measure_tactile(material, rng, sigma_meas, repeats=5):
    """``repeats`` noisy measurements of the true vector, clipped to [0, 100]."""
    if sigma_meas < 0:
        raise ValueError("sigma_meas must be >= 0")
    t = np.asarray(material.tactile if isinstance(material, MaterialSample) else material, dtype=np.float64)
    noise = rng.normal(0.0, sigma_meas, size=(repeats, t.size)) if sigma_meas > 0 else np.zeros((repeats, t.size))
    return np.clip(t[None, :] + noise, 0.0, 100.0)


def mean_specular_profile(angles, grid=64):
    """Specular weight per view, averaged over lobe centres and widths (unit gain)."""
    a = np.asarray(angles, dtype=np.float64)[:, None, None]
    c = np.linspace(*SPEC_CENTER_RANGE, grid)[None, :, None]
    w = np.linspace(*SPEC_WIDTH_RANGE, grid)[None, None, :]
    return np.exp(-((a - c) ** 2) / (2 * w ** 2)).mean(axis=(1, 2))


def informative_band(angles, fraction=0.5):
    """Indices of views whose mean specular weight reaches ``fraction`` of the peak."""
    prof = mean_specular_profile(angles)
    return np.flatnonzero(prof >= fraction * prof.max())
