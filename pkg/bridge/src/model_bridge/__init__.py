"""Reference model server for the subgoal search wire protocol.

Fits a tabular subgoal/value/policy model from trajectory record files and
serves it over newline-delimited JSON (protocol v1) on stdio or TCP.
Standard library only.
"""

from .model import TabularModel, fit, load_model, save_model
from .records import Record, group_trajectories, read_records
from .server import (
    PROTOCOL_VERSION,
    make_tcp_server,
    run_session,
    serve_stdio,
    serve_tcp,
)

__version__ = "0.1.0"

__all__ = [
    "PROTOCOL_VERSION",
    "Record",
    "TabularModel",
    "fit",
    "group_trajectories",
    "load_model",
    "make_tcp_server",
    "read_records",
    "run_session",
    "save_model",
    "serve_stdio",
    "serve_tcp",
    "__version__",
]
