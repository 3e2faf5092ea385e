"""The fifteen tactile properties, in the canonical column order."""

from dataclasses import dataclass


@dataclass(frozen=True)
class TactileProperty:
    acronym: str
    name: str
    category: str
    description: str


PROPERTIES = (
    TactileProperty("fRS", "Sliding Resistance", "friction",
                    "Effort needed to start a slide; low grip to high grip."),
    TactileProperty("fST", "Tactile Stiction", "friction",
                    "Effort needed to keep sliding; slippery to resistive."),
    TactileProperty("uCO", "Microtexture Coarseness", "texture",
                    "Spacing of sub-millimetre features; fine to coarse."),
    TactileProperty("uRO", "Microtexture Roughness", "texture",
                    "Strength of sub-millimetre features; smooth to rough."),
    TactileProperty("mRG", "Macrotexture Regularity", "texture",
                    "Uniformity of features above a millimetre; random to regular."),
    TactileProperty("mCO", "Macrotexture Coarseness", "texture",
                    "Spacing of features above a millimetre; fine to coarse."),
    TactileProperty("mTX", "Macrotexture", "texture",
                    "Strength of features above a millimetre; smooth to textured."),
    TactileProperty("tCO", "Thermal Cooling", "thermal",
                    "Initial rate of heat drawn from the fingertip; warm to cool."),
    TactileProperty("tPR", "Thermal Persistence", "thermal",
                    "How long heat keeps being drawn; transient to sustained cooling."),
    TactileProperty("cCM", "Tactile Compliance", "compliance",
                    "Deformation under pressure; rigid to compliant."),
    TactileProperty("cDF", "Local Deformation", "compliance",
                    "How far the surface wraps the fingertip; flat to high wrap."),
    TactileProperty("cDP", "Damping", "compliance",
                    "Speed of shape recovery after pressing; springy to damped."),
    TactileProperty("cRX", "Relaxation", "compliance",
                    "Loss of push-back force while held deformed; maintaining to relaxing."),
    TactileProperty("cYD", "Yielding", "compliance",
                    "Residual deformation after release; recovering to remaining deformed."),
    TactileProperty("aTK", "Adhesive Tack", "adhesion",
                    "Effort needed to break contact; no adhesion to sticky."),
)

ACRONYMS = tuple(p.acronym for p in PROPERTIES)
CATEGORIES = ("friction", "texture", "thermal", "compliance", "adhesion")
NUM_PROPERTIES = len(PROPERTIES)

# fixed membership of the eight-property percentage-error aggregate
TOP8 = ("fRS", "cDF", "tCO", "cYD", "aTK", "mTX", "cCM", "cDP")

FRICTION = ("fRS", "fST")
COMPLIANCE = ("cCM", "cDF", "cDP", "cRX", "cYD")


def index_of(acronym):
    try:
        return ACRONYMS.index(acronym)
    except ValueError:
        raise KeyError(f"unknown tactile property {acronym!r}") from None
