"""Multi-view subject-to-video diffusion lab."""

__version__ = "0.1.0"
