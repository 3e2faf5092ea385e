"""Visual to tactile property estimation with learned viewpoint selection."""

__version__ = "0.1.0"
