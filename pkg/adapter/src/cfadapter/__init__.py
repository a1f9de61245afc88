"""Reference conditional VAE/GAN counterfactual models for the axbench protocol."""

__version__ = "0.1.0"
