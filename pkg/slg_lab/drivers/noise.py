"""Counter-based Brownian increments for reproducible ensembles."""

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseStream:
    """Brownian source W(q) with variance (kappa / 2) per unit auxiliary time.

    Draws are keyed by (seed, path_index) and the Philox counter is set from the
    step index, so any step of any path can be regenerated independently of the
    order in which paths or steps are evaluated.
    """

    seed: int
    path_index: int = 0
    kappa: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        if self.path_index < 0:
            raise ValueError("path_index must be non-negative")

    def generator(self, step: int) -> np.random.Generator:
        if step < 0:
            raise ValueError("step must be non-negative")
        key = np.array([self.seed & _MASK64, self.path_index & _MASK64], dtype=np.uint64)
        counter = np.array([0, 0, step & _MASK64, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def normal(self, step: int) -> float:
        """The standard normal draw attached to a step."""
        return float(self.generator(step).standard_normal())

    def normals(self, step: int, size: int) -> np.ndarray:
        return self.generator(step).standard_normal(size)

    def increment(self, step: int, dq: float) -> float:
        """Brownian increment over auxiliary time dq at the given step.

        Raises:
            ValueError: If dq is negative
        """
        if dq < 0:
            raise ValueError(f"Auxiliary time increment must be non-negative, got {dq}")
        return float(np.sqrt(0.5 * self.kappa * dq) * self.normal(step))
