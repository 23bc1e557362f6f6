"""Deterministic environments: grid world, Rubik's Cube, Sokoban."""

from .grid import GridConfig, GridModel
from .rubik import RubikModel
from .sokoban import Board, SokobanModel

__all__ = ["Board", "GridConfig", "GridModel", "RubikModel", "SokobanModel"]
