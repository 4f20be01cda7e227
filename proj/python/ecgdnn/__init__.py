"""ECG abnormality classification toolkit."""

from ._ecgdnn import *  # noqa: F401,F403
from ._ecgdnn import CLASS_NAMES, __doc__  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
