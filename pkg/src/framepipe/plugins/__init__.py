"""Built-in plugins. Importing this package registers all of them."""

from . import loaders, multimodal, savers, tomo  # noqa: F401
