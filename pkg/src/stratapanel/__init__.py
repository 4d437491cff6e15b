"""Stratigraphic logs and correlation panels from 3D outcrop contact annotations."""

__version__ = "0.1.0"
