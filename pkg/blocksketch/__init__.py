"""blocksketch: block-sparsity estimation from alpha-stable sketches, with CoSaMP recovery studies."""

__version__ = "1.0.0"
