"""Planning toolchain for articulated-object manipulation with streamed, monitored plan execution."""

__version__ = "0.1.0"
