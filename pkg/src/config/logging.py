import logging
import sys
import os
from pathlib import Path
import socket
from contextvars import ContextVar
from typing import Optional
import structlog
from structlog.types import EventDict, WrappedLogger

# Context variables
run_id_var: ContextVar[Optional[str]] = ContextVar("run_id", default=None)
command_var: ContextVar[Optional[str]] = ContextVar("command", default=None)
roi_var: ContextVar[Optional[str]] = ContextVar("roi", default=None)

HOST_NAME = socket.gethostname()


def get_log_level() -> int:
    log_level_str = os.getenv("LOG_LEVEL", "INFO").upper()
    return {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }.get(log_level_str, logging.INFO)


def add_context_info(logger: WrappedLogger, method_name: str, event_dict: EventDict) -> EventDict:
    run_id = run_id_var.get()
    if run_id:
        event_dict["run_id"] = run_id
    command = command_var.get()
    if command:
        event_dict["command"] = command
    roi = roi_var.get()
    if roi:
        event_dict["roi"] = roi
    event_dict["host_name"] = HOST_NAME
    return event_dict


def configure_stream_handler(root_logger) -> logging.Handler:
    # stderr: stdout carries the command summaries
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(logging.Formatter("%(message)s"))
    root_logger.addHandler(stream_handler)
    return stream_handler


def configure_file_handler(root_logger, log_filename: str) -> logging.Handler:
    log_dir = Path(os.getenv("LOG_DIR", "logs"))
    log_dir.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_dir / log_filename, encoding="utf-8")
    file_handler.setFormatter(logging.Formatter("%(message)s"))
    root_logger.addHandler(file_handler)
    return file_handler


def configure_logging(log_filename: str = "vibrometry.log", to_file: bool = True) -> None:
    log_level = get_log_level()

    # 1) stdlib handlers: stderr + file
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    configure_stream_handler(root_logger)
    if to_file:
        configure_file_handler(root_logger, log_filename)

    # numba's compiler logs are noise at INFO
    logging.getLogger("numba").setLevel(logging.WARNING)

    # 2) structlog: used for OUR app logs, always JSON
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,  # skip below log level
            structlog.contextvars.merge_contextvars,
            structlog.processors.TimeStamper(fmt="iso", utc=True, key="timestamp"),
            structlog.processors.CallsiteParameterAdder(
                [
                    structlog.processors.CallsiteParameter.FILENAME,
                    structlog.processors.CallsiteParameter.FUNC_NAME,
                    structlog.processors.CallsiteParameter.LINENO
                ]
            ),
            structlog.stdlib.add_log_level,  # adds "level"
            structlog.stdlib.add_logger_name,  # adds "logger"
            add_context_info,  # run/command/roi/host
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,  # exception info if exc_info=True
            structlog.processors.JSONRenderer(),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def get_logger(name: Optional[str] = None) -> structlog.stdlib.BoundLogger:
    return structlog.get_logger(name)


def set_run_id(run_id: str) -> None:
    run_id_var.set(run_id)


def set_command(command: str) -> None:
    command_var.set(command)


def set_roi(roi: Optional[str]) -> None:
    roi_var.set(roi)


def clear_context() -> None:
    run_id_var.set(None)
    command_var.set(None)
    roi_var.set(None)
