"""Recipe editing with a denoising auto-encoder and latent critiquing."""

__version__ = "0.1.0"
