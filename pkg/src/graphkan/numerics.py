"""Dense float64 arithmetic, seeded RNG streams, parameter init and the
central-difference gradient oracle used throughout the test suite."""

import numpy as np

DTYPE = np.float64


def as_matrix(a, name="matrix"):
    m = np.asarray(a, dtype=DTYPE)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def matmul(a, b):
    """Checked matrix product of two 2-D float64 arrays."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matmul produced non-finite entries")
    return out


def make_rng(seed, *stream):
    """Seeded generator; the bit generator is pinned to PCG64.

    Extra ``stream`` integers derive independent, reproducible substreams
    from one base seed (e.g. ``make_rng(seed, 1)`` for the init stream).
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def init_params(rng, rows, cols, rule="uniform", scale=0.1):
    if rows <= 0 or cols <= 0:
        raise ValueError(f"init_params needs positive dims, got {rows}x{cols}")
    if rule == "zeros":
        return np.zeros((rows, cols), dtype=DTYPE)
    if rule == "uniform":
        return rng.uniform(-scale, scale, size=(rows, cols))
    raise ValueError(f"unknown init rule {rule!r}")


def finite_diff_grad(f, x, eps=1e-5):
    """Central-difference gradient of scalar ``f`` at array ``x`` (any shape).

    ``x`` keeps its precision if it is wider than float64 (``np.longdouble``),
    so ``f`` can be evaluated in extended precision.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=np.result_type(np.asarray(x).dtype, DTYPE))
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value at coordinate {i}")
        g[i] = (fp - fm) / (2.0 * eps)
    return grad


def rel_error(analytic, numeric, floor=1e-8):
    """Elementwise |a - n| / max(|a|, |n|, floor); returns the worst entry."""
    a = np.asarray(analytic, dtype=DTYPE)
    n = np.asarray(numeric, dtype=DTYPE)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))
