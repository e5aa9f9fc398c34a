from .core import Spectrum, SpectrumBackend, get_backend

__all__ = ["Spectrum", "SpectrumBackend", "get_backend"]
