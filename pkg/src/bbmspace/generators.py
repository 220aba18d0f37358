"""Synthetic grid functions.

Piecewise-constant kinds (step, checkerboard, indicator, cascade, random) are
defined on the continuum and reduced to exact cell averages, so the same
function can be compared across resolutions.  ``smooth`` and ``logsing`` are
point samples at cell centres.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DomainError
from .grid import GridFunction
from .mollifier import apply_separable


def _overlap_matrix(n: int, breaks: np.ndarray) -> np.ndarray:
    """Fraction of grid cell ``i`` covered by the interval ``[breaks[j], breaks[j+1]]``."""
    edges = np.arange(n + 1) / n
    ov = (np.minimum(edges[1:, None], breaks[None, 1:])
          - np.maximum(edges[:-1, None], breaks[None, :-1]))
    return np.clip(ov, 0.0, None) * n


def _axis_mean(n: int, breaks: np.ndarray, levels: np.ndarray) -> np.ndarray:
    return _overlap_matrix(n, breaks) @ levels


def _outer(vectors):
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def constant(d, n, c=1.0):
    return GridFunction.constant(d, n, c)


def step(d, n, at=0.5, axis=0):
    """Indicator of ``{x_axis > at}``."""
    if not 0 <= axis < d:
        raise DomainError(f"axis must lie in 0..{d - 1}")
    prof = _axis_mean(n, np.array([0.0, at, 1.0]), np.array([0.0, 1.0]))
    vecs = [np.ones(n)] * d
    vecs[axis] = prof
    return GridFunction(_outer(vecs))


def _sign_profile(n, scale):
    pieces = int(np.ceil(1.0 / scale - 1e-12))
    breaks = np.minimum(np.arange(pieces + 1) * scale, 1.0)
    return _axis_mean(n, breaks, (-1.0) ** np.arange(pieces))


def checkerboard(d, n, scale=0.25):
    """0/1 checkerboard with square tiles of side ``scale``; the tile at the origin is 0."""
    if not 0 < scale <= 1:
        raise DomainError(f"scale must lie in (0, 1], got {scale}")
    prof = _sign_profile(n, scale)
    return GridFunction((1.0 - _outer([prof] * d)) / 2.0)


def indicator(d, n, lo=None, hi=None):
    """Indicator of the box ``prod [lo_k, hi_k]`` (default ``[0, 1/2]^d``)."""
    lo = [0.0] * d if lo is None else list(lo)
    hi = [0.5] * d if hi is None else list(hi)
    if len(lo) != d or len(hi) != d:
        raise DomainError("indicator corners must have d coordinates")
    vecs = [_axis_mean(n, np.array([0.0, a, b, 1.0]), np.array([0.0, 1.0, 0.0]))
            for a, b in zip(lo, hi)]
    return GridFunction(_outer(vecs))


def cascade(d, n, levels=4):
    """Mean of checkerboards at scales ``1/2, 1/4, ..., 2**-levels``."""
    if levels < 1:
        raise DomainError("levels must be >= 1")
    total = sum(checkerboard(d, n, 2.0**-j).values for j in range(1, levels + 1))
    return GridFunction(total / levels)


def random_blocks(d, n, seed=0, blocks=None):
    """Uniform random values on a ``blocks**d`` coarse grid (default: one per cell)."""
    blocks = n if blocks is None else int(blocks)
    rng = np.random.default_rng(seed)
    coarse = rng.random((blocks,) * d)
    if blocks == n:
        return GridFunction(coarse)
    A = _overlap_matrix(n, np.arange(blocks + 1) / blocks)
    return GridFunction(apply_separable(coarse, A))


def _centres(d, n):
    c = (np.arange(n) + 0.5) / n
    return np.meshgrid(*[c] * d, indexing="ij")


def smooth(d, n, profile="product", freq=1.0):
    """Point samples of ``prod x_k`` or of ``sin(2 pi freq x_1)``."""
    xs = _centres(d, n)
    if profile == "product":
        vals = np.ones((n,) * d)
        for x in xs:
            vals = vals * x
    elif profile == "sine":
        vals = np.sin(2 * np.pi * freq * xs[0])
    else:
        raise ArgumentError(f"unknown smooth profile {profile!r}")
    return GridFunction(vals)


def logsing(d, n, x0=None):
    """Samples of ``|log|x - x0||``; distances are floored at half a cell."""
    x0 = [0.5] * d if x0 is None else list(x0)
    xs = _centres(d, n)
    r = np.sqrt(sum((x - a) ** 2 for x, a in zip(xs, x0)))
    return GridFunction(np.abs(np.log(np.maximum(r, 0.5 / n))))


KINDS = {
    "constant": constant,
    "step": step,
    "checkerboard": checkerboard,
    "indicator": indicator,
    "cascade": cascade,
    "random": random_blocks,
    "smooth": smooth,
    "logsing": logsing,
}


def generate(kind: str, d: int, n: int, seed: int = 0, **params) -> GridFunction:
    if kind not in KINDS:
        raise ArgumentError(f"unknown kind {kind!r}; available: {', '.join(KINDS)}")
    if not 1 <= d <= 3 or n < 1:
        raise DomainError(f"need 1 <= d <= 3 and n >= 1, got d={d}, n={n}")
    fn = KINDS[kind]
    if kind == "random":
        params.setdefault("seed", seed)
    try:
        return fn(d, n, **params)
    except TypeError as exc:
        raise ArgumentError(f"bad parameters for {kind!r}: {exc}") from None


# fixed corpus for the approximation studies
CORPUS = {
    "step": ("step", {}),
    "checkerboard": ("checkerboard", {"scale": 0.25}),
    "cascade": ("cascade", {"levels": 4}),
    "random": ("random", {"blocks": 8, "seed": 1}),
}


def corpus(d: int, n: int) -> dict:
    """The fixed test corpus on the ``n**d`` grid, keyed by name."""
    return {name: generate(kind, d, n, **dict(params)) for name, (kind, params) in CORPUS.items()}
