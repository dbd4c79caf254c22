"""Woodpile photonic-crystal cavities: band structure, FDTD ringdowns, mode volumes and cavity QED."""

__version__ = "0.1.0"
