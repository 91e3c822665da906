"""logging utilities"""

import time
from functools import wraps

from tornado.log import app_log


def log_duration(f):
    """Record the time a (long) analysis takes

    Analyses over half a second are logged at INFO level,
    quicker ones at DEBUG.
    """

    @wraps(f)
    def wrapped(*args, **kwargs):
        tic = time.perf_counter()
        try:
            return f(*args, **kwargs)
        finally:
            t = time.perf_counter() - tic
            if t > 0.5:
                log = app_log.info
            else:
                log = app_log.debug
            log(f"{f.__qualname__} took {t:.3f}s")

    return wrapped
