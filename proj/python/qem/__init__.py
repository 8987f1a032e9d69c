"""Python bindings for the QEM quantile-DRL engine."""

from _qem import *  # noqa: F401,F403
