from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..config import complex_pairs, parse_complex, parse_complex_list
from ..utils.exceptions import ConfigParse
from .base import Density


class FourierDensity(Density):
    """
    h(t) = Σ_{j=-J..J} c_j e^{ijt}; coefficients are listed from j = -J to J.
    """
    def __init__(self, coefficients: Sequence[complex], name: str = "h"):
        super().__init__(name)
        coefficients = np.asarray(coefficients, dtype=complex)
        if coefficients.ndim != 1 or len(coefficients) % 2 == 0:
            raise ValueError("Fourier coefficients must be an odd-length list indexed from -J to J.")
        self.coefficients = coefficients
        self.order = (len(coefficients) - 1) // 2

    @classmethod
    def mode(cls, j: int, amplitude: complex = 1.0, name: str = "h") -> "FourierDensity":
        J = abs(j)
        coefficients = np.zeros(2 * J + 1, dtype=complex)
        coefficients[j + J] = amplitude
        return cls(coefficients, name)

    @classmethod
    def random(cls, order: int, seed=None, name: str = "h") -> "FourierDensity":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        coefficients = rng.normal(size=2 * order + 1) + 1j * rng.normal(size=2 * order + 1)
        return cls(coefficients / (1.0 + np.abs(np.arange(-order, order + 1))), name)

    def values(self, t: np.ndarray) -> np.ndarray:
        j = np.arange(-self.order, self.order + 1)
        return np.exp(1j * np.multiply.outer(t, j)) @ self.coefficients

    def to_document(self) -> Dict[str, object]:
        return {"fourier": complex_pairs(self.coefficients)}


class ConstantDensity(Density):
    def __init__(self, value: complex = 1.0, name: str = "h"):
        super().__init__(name)
        self.value = complex(value)

    def values(self, t: np.ndarray) -> np.ndarray:
        return np.full(np.shape(t), self.value, dtype=complex)

    def to_document(self) -> Dict[str, object]:
        return {"constant": complex_pairs([self.value])[0]}


class SampledDensity(Density):
    """
    Raw samples at K equispaced nodes t_k = 2πk/K, evaluated elsewhere by
    trigonometric interpolation.
    """
    def __init__(self, samples: Sequence[complex], name: str = "h"):
        super().__init__(name)
        self.samples = np.asarray(samples, dtype=complex)
        if self.samples.ndim != 1 or len(self.samples) < 1:
            raise ValueError("Sampled density needs a non-empty list of samples.")
        self._spectrum = np.fft.fft(self.samples) / len(self.samples)

    def values(self, t: np.ndarray) -> np.ndarray:
        K = len(self.samples)
        t = np.asarray(t, dtype=float)
        nodes = 2.0 * np.pi * np.arange(K) / K
        if t.shape == nodes.shape and np.allclose(t, nodes, atol=1e-14):
            return self.samples.copy()
        j = np.fft.fftfreq(K, d=1.0 / K)
        return np.exp(1j * np.multiply.outer(t, j)) @ self._spectrum

    def to_document(self) -> Dict[str, object]:
        return {"samples": complex_pairs(self.samples)}


class LinearCombination(Density):
    def __init__(self, terms: List[Tuple[complex, Density]], name: str = "h"):
        super().__init__(name)
        self._terms = [(complex(c), d) for c, d in terms]

    def terms(self) -> List[Tuple[complex, Density]]:
        return list(self._terms)

    def values(self, t: np.ndarray) -> np.ndarray:
        total = np.zeros(np.shape(t), dtype=complex)
        for coefficient, density in self._terms:
            total = total + coefficient * density.values(t)
        return total

    def to_document(self) -> Dict[str, object]:
        return {"combination": [{"coefficient": complex_pairs([c])[0], "density": d.to_document()}
                                for c, d in self._terms]}


def density_from_document(document, name: str = "h") -> Density:
    if not isinstance(document, dict):
        raise ConfigParse(f"density {name}: expected an object")
    if "fourier" in document:
        coefficients = parse_complex_list(document["fourier"], f"{name}.fourier")
        if len(coefficients) % 2 == 0:
            raise ConfigParse(f"{name}.fourier: expected an odd number of coefficients (-J..J)")
        return FourierDensity(coefficients, name)
    if "constant" in document:
        return ConstantDensity(parse_complex(document["constant"], f"{name}.constant"), name)
    if "samples" in document:
        return SampledDensity(parse_complex_list(document["samples"], f"{name}.samples"), name)
    if "combination" in document:
        terms = [(parse_complex(term.get("coefficient", 1.0), f"{name}.coefficient"),
                  density_from_document(term.get("density"), name)) for term in document["combination"]]
        return LinearCombination(terms, name)
    raise ConfigParse(f"density {name}: expected 'fourier', 'constant', 'samples' or 'combination'")
