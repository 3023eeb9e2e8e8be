"""Run independent seeds sequentially or in a process pool."""
import os
from concurrent.futures import ProcessPoolExecutor

THREADS_ENV = "CONTRACT_RL_THREADS"


def pool_size(requested=None, tasks=1):
    """Worker count: the request (default: CPU count), capped by CONTRACT_RL_THREADS and the task count."""
    n = requested if requested and requested > 0 else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, min(n, tasks))


def _call(job):
    fn, args = job
    return fn(*args)


def map_seeds(fn, arg_tuples, workers=None, on_result=None):
    """Apply ``fn`` to each argument tuple; results come back in input order."""
    arg_tuples = list(arg_tuples)
    n = pool_size(workers, len(arg_tuples))
    results = []
    if n == 1:
        for args in arg_tuples:
            r = fn(*args)
            if on_result is not None:
                on_result(r)
            results.append(r)
        return results
    with ProcessPoolExecutor(max_workers=n) as ex:
        for r in ex.map(_call, [(fn, a) for a in arg_tuples]):
            if on_result is not None:
                on_result(r)
            results.append(r)
    return results
