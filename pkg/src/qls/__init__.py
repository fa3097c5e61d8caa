"""Expectation-value level sets: contours, orthogonal control maps, a grid
level-set engine and 2D oscillator lattices."""

__version__ = "0.1.0"
