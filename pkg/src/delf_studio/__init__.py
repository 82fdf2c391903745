"""delf-studio: design, codify, validate, and analyze RL environment representations."""

__version__ = "0.1.0"
