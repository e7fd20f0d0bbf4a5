"""Global shape operator built from all-pairs quasi-geodesic distances on a
triangle mesh, and its eigenspectrum applications: self-symmetry maps,
prior-free correspondence between isometric shapes and stable regions."""

__version__ = "0.1.0"
