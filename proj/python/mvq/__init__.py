"""Masked vector quantization toolkit: N:M pruning, masked k-means,
codebook quantization, bit-exact packing, and an analytical model of the
sparse systolic-array accelerator."""

from mvq._core import *  # noqa: F401,F403
from mvq._core import __version__  # noqa: F401
