from abc import ABC, abstractmethod
from typing import Dict, List, Tuple, Union

import numpy as np


class Density(ABC):
    """
    Abstract base class for densities h on a contour.

    A density is a function of the contour parameter t ∈ [0, 2π) only, so it
    does not change when the branch points move and the contour is carried
    along at fixed λ.
    """
    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    def values(self, t: np.ndarray) -> np.ndarray:
        """
        Returns h at the parameter values t.
        """
        pass

    @abstractmethod
    def to_document(self) -> Dict[str, object]:
        """
        Returns the JSON form of the density.
        """
        pass

    def __call__(self, t):
        return self.values(np.asarray(t, dtype=float))

    def terms(self) -> List[Tuple[complex, "Density"]]:
        return [(1.0 + 0j, self)]

    def __add__(self, other: "Density") -> "Density":
        from .densities import LinearCombination
        return LinearCombination(self.terms() + other.terms())

    def __sub__(self, other: "Density") -> "Density":
        return self + (-1.0) * other

    def __rmul__(self, factor: Union[complex, float]) -> "Density":
        from .densities import LinearCombination
        return LinearCombination([(complex(factor) * c, d) for c, d in self.terms()])

    def __neg__(self) -> "Density":
        return (-1.0) * self

    def __repr__(self):
        return f"{self.__class__.__name__}(name='{self.name}')"
