"""Run deeply recursive evaluations on a thread with a large C stack."""

from __future__ import annotations

import sys
import threading

STACK_BYTES = 1 << 30
RECURSION_LIMIT = 400_000

_lock = threading.Lock()


def deep_call(fn, *args, **kwargs):
    """Call ``fn`` on a helper thread whose stack fits RECURSION_LIMIT frames.

    Exceptions propagate to the caller unchanged.
    """
    if getattr(_local, "inside", False):
        return fn(*args, **kwargs)
    box: dict = {}

    def target():
        _local.inside = True
        try:
            box["value"] = fn(*args, **kwargs)
        except BaseException as e:  # re-raised on the calling thread
            box["error"] = e

    global _active, _saved_limit
    with _lock:
        if _active == 0:
            _saved_limit = sys.getrecursionlimit()
            sys.setrecursionlimit(max(_saved_limit, RECURSION_LIMIT))
        _active += 1
        old_stack = threading.stack_size(STACK_BYTES)
        try:
            t = threading.Thread(target=target, name="fcvm-eval")
            t.start()
        finally:
            threading.stack_size(old_stack)
    t.join()
    with _lock:
        _active -= 1
        if _active == 0:
            sys.setrecursionlimit(_saved_limit)
    if "error" in box:
        raise box["error"]
    return box["value"]


_local = threading.local()
_active = 0
_saved_limit = 1000
