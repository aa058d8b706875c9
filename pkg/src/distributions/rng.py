"""
Разделяемый генератор случайных чисел на счётчиковом Philox
"""
import numpy as np

from ..utils.errors import ParameterError


class Rng:
    """Генератор со своим зерном и детерминированными дочерними потоками.

    Дочерний поток child(i) зависит только от зерна и индекса i, поэтому
    цепочки получают независимые потоки при любом порядке запуска.
    """

    def __init__(self, seed: int | None = None, _sequence: np.random.SeedSequence | None = None):
        if _sequence is None:
            if seed is not None and int(seed) < 0:
                raise ParameterError(f"зерно должно быть неотрицательным, получено {seed}")
            _sequence = np.random.SeedSequence(None if seed is None else int(seed))
        self._sequence = _sequence
        self.seed = int(_sequence.entropy)
        self.spawn_key = tuple(_sequence.spawn_key)
        self.generator = np.random.Generator(np.random.Philox(_sequence))

    def child(self, index: int) -> "Rng":
        """Независимый поток с номером index."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key + (int(index),))
        return Rng(_sequence=seq)

    def spawn(self, n: int) -> list["Rng"]:
        return [self.child(i) for i in range(n)]

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.spawn_key})"
