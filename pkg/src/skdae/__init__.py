"""Skip-connection denoising autoencoder for speech feature enhancement."""

__version__ = "0.1.0"
