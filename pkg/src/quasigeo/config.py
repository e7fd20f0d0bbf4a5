"""Run configuration shared by the command-line pipeline."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

from .geodesic.paths import DEFAULT_MAX_ITER, DEFAULT_TOL
from .mesh import default_cache_dir
from .spectrum import DEFAULT_K0


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run; echoed verbatim into each JSON artifact.

    ``threads`` only affects speed.  ``cache_dir=None`` disables the
    distance cache.
    """

    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    k0: int = DEFAULT_K0
    ordering: str = "abs-desc"
    eps_mode: str = "variance"
    eps: float = 1.0
    cache_dir: str | None = field(default_factory=lambda: str(default_cache_dir()))
    threads: int | None = None
    out: str = "out"
    seed: int = 0
    format: str = "auto"
    threshold: float = 0.25
    figures: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.k0 < 1:
            raise ValueError("k0 must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        # thread count changes speed only, never results
        d.pop("threads")
        return d

    @property
    def out_dir(self) -> Path:
        return Path(self.out)
