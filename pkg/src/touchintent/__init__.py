"""Touch-intention recognition for a tactile-skinned dual-arm robot."""

__version__ = "0.1.0"
