from __future__ import annotations

import logging
from rich.logging import RichHandler


_logger = None

_LEVELS = {
	"debug": logging.DEBUG,
	"info": logging.INFO,
	"warning": logging.WARNING,
	"error": logging.ERROR,
}


def get_logger() -> logging.Logger:
	global _logger
	if _logger is not None:
		return _logger

	logger = logging.getLogger("struct_sparsity")
	logger.setLevel(logging.INFO)
	if not logger.handlers:
		handler = RichHandler(rich_tracebacks=True, show_time=True, show_path=False)
		formatter = logging.Formatter("%(message)s")
		handler.setFormatter(formatter)
		logger.addHandler(handler)
	_logger = logger
	return logger


def set_level(name: str) -> None:
	level = _LEVELS.get(str(name).lower())
	if level is None:
		get_logger().warning(f"Unknown log level {name!r}, keeping {logging.getLevelName(get_logger().level)}")
		return
	get_logger().setLevel(level)
