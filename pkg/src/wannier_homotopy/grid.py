"""Uniform k-point grids on the torus [0, 1)^d."""
from dataclasses import dataclass

import numpy as np

MIN_FRAME_SIZE = 8


@dataclass(frozen=True)
class KGrid:
    """Half-open uniform grid ``k_i = i / size`` along every axis.

    The point past the last index is identified with index 0 (``k + e_j ~ k``).
    """

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in np.atleast_1d(self.sizes))
        if not 1 <= len(sizes) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(sizes)}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"grid sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def dim(self):
        return len(self.sizes)

    @property
    def shape(self):
        return self.sizes

    @property
    def n_points(self):
        return int(np.prod(self.sizes))

    @property
    def spacing(self):
        return tuple(1.0 / s for s in self.sizes)

    def axis(self, i):
        return np.arange(self.sizes[i]) / self.sizes[i]

    def coords(self):
        """Array of shape ``sizes + (dim,)`` with the reduced coordinates."""
        axes = np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij")
        return np.stack(axes, axis=-1)

    def wrap(self, index):
        return tuple(int(i) % s for i, s in zip(index, self.sizes))

    def check_frame_sizes(self):
        if min(self.sizes) < MIN_FRAME_SIZE:
            raise ValueError(
                f"grid {self} has axes below {MIN_FRAME_SIZE} points; too coarse for a frame"
            )

    @classmethod
    def parse(cls, text):
        """Parse ``"N"``, ``"NxM"`` or ``"NxMxL"``."""
        try:
            return cls(tuple(int(p) for p in str(text).lower().split("x")))
        except ValueError as exc:
            raise ValueError(f"bad grid specification {text!r}") from exc

    def __str__(self):
        return "x".join(str(s) for s in self.sizes)
