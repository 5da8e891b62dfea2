"""Building detection, residential classification and water consumption estimation from multiband imagery."""

__version__ = "0.1.0"
