"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor arguments disagree on shape or have an unexpected rank."""


class ConfigurationError(ValueError):
    """A config value, range, or schedule index is invalid."""


class BackendError(RuntimeError):
    """A denoiser/embedder backend is unavailable or misbehaved."""


class GradientError(RuntimeError):
    """A non-finite gradient was produced during latent optimization."""
