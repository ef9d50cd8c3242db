"""specgram: spectral fluctuations of sparse Gram matrices with a variance profile."""
from .domain.types import PACKAGE_VERSION

__version__ = PACKAGE_VERSION

__all__ = ["__version__"]
