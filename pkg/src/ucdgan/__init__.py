"""Conditional-GAN training lab with an unconditional discriminator."""

__version__ = "0.1.0"
