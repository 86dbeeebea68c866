"""GAN training lab for distribution-fitting penalties on 2D Gaussian mixtures."""

__version__ = "0.1.0"
