"""Reference inference backend for the diarkit line protocol."""

__version__ = "0.1.0"

from .config import AdapterConfig, load_config
from .server import serve, serve_loop

__all__ = ["AdapterConfig", "load_config", "serve", "serve_loop"]
