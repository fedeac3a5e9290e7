"""Synthetic black-box training/test problems.

Eight base functions, each with its global optimum at the origin and a
known optimum value, augmented into a boundless task distribution by a
random shift z and a random rotation M: instances evaluate
``f_base(M^T (x + z))``, so the optimum of an instance sits at ``x = -z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DEFAULT_BOUNDS = (-100.0, 100.0)
SHIFT_RANGE = 80.0


def sphere(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=1)


def rastrigin(x: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return 10.0 * d + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x), axis=1)


def bent_cigar(x: np.ndarray) -> np.ndarray:
    return x[:, 0] ** 2 + 1e6 * np.sum(x[:, 1:] ** 2, axis=1)


_SCHWEFEL_OFFSET = 420.9687


def _schwefel_g(z: np.ndarray, d: int) -> np.ndarray:
    # piecewise form keeps the function defined outside |z| <= 500
    g = np.empty_like(z)
    inside = np.abs(z) <= 500.0
    g[inside] = z[inside] * np.sin(np.sqrt(np.abs(z[inside])))
    hi = z > 500.0
    if hi.any():
        zm = 500.0 - np.mod(z[hi], 500.0)
        g[hi] = zm * np.sin(np.sqrt(np.abs(zm))) - (z[hi] - 500.0) ** 2 / (10000.0 * d)
    lo = z < -500.0
    if lo.any():
        zm = np.mod(np.abs(z[lo]), 500.0) - 500.0
        g[lo] = zm * np.sin(np.sqrt(np.abs(zm))) - (z[lo] + 500.0) ** 2 / (10000.0 * d)
    return g


def schwefel(x: np.ndarray) -> np.ndarray:
    """Schwefel with the 420.9687 offset pre-composed; optimum at the origin."""
    d = x.shape[1]
    z = x + _SCHWEFEL_OFFSET
    return 418.9828872724338 * d - np.sum(_schwefel_g(z, d), axis=1)


def lunacek_bi_rastrigin(x: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    mu0 = 2.5
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((mu0 * mu0 - 1.0) / s)
    u = x + mu0
    sphere_part = np.sum((u - mu0) ** 2, axis=1)
    funnel_part = d + s * np.sum((u - mu1) ** 2, axis=1)
    return np.minimum(sphere_part, funnel_part) + 10.0 * (
        d - np.sum(np.cos(2.0 * np.pi * (u - mu0)), axis=1))


def rosenbrock_griewank(x: np.ndarray) -> np.ndarray:
    """Expanded Rosenbrock composed with 1-D Griewank, optimum at the origin."""
    u = x + 1.0
    v = np.roll(u, -1, axis=1)
    r = 100.0 * (u * u - v) ** 2 + (u - 1.0) ** 2
    return np.sum(r * r / 4000.0 - np.cos(r) + 1.0, axis=1)


def _composition(x, components):
    """CEC-style composition: inverse-distance x Gaussian weights.

    Each component is (fn, offset scalar per coordinate, sigma, lam, bias).
    The first component has offset 0 and bias 0, so the composed optimum
    stays at the origin with value 0.
    """
    d = x.shape[1]
    values = []
    weights = []
    for fn, offset, sigma, lam, bias in components:
        shifted = x - offset
        sq = np.sum(shifted * shifted, axis=1)
        dist = np.sqrt(sq)
        with np.errstate(divide="ignore"):
            w = np.where(dist > 0.0,
                         np.exp(-sq / (2.0 * d * sigma * sigma)) / np.where(dist > 0, dist, 1.0),
                         np.inf)
        values.append(lam * fn(shifted) + bias)
        weights.append(w)
    values = np.stack(values)       # (n_comp, n)
    weights = np.stack(weights)
    exact = np.isinf(weights).any(axis=0)
    out = np.empty(x.shape[0])
    if exact.any():
        comp_idx = np.argmax(np.isinf(weights[:, exact]), axis=0)
        out[exact] = values[comp_idx, np.nonzero(exact)[0]]
    rest = ~exact
    if rest.any():
        wn = weights[:, rest]
        out[rest] = np.sum(wn * values[:, rest], axis=0) / np.sum(wn, axis=0)
    return out


def simple_composition_2(x: np.ndarray) -> np.ndarray:
    return _composition(x, [
        (rastrigin, 0.0, 10.0, 1.0, 0.0),
        (sphere, 40.0, 20.0, 1.0, 100.0),
    ])


def simple_composition_3(x: np.ndarray) -> np.ndarray:
    return _composition(x, [
        (rastrigin, 0.0, 10.0, 1.0, 0.0),
        (sphere, 40.0, 20.0, 1.0, 100.0),
        (bent_cigar, -50.0, 30.0, 1e-6, 200.0),
    ])


CATALOG = {
    "Sphere": sphere,
    "Rastrigin": rastrigin,
    "BentCigar": bent_cigar,
    "Schwefel": schwefel,
    "LunacekBiRastrigin": lunacek_bi_rastrigin,
    "RosenbrockGriewank": rosenbrock_griewank,
    "SimpleComposition2": simple_composition_2,
    "SimpleComposition3": simple_composition_3,
}

DEFAULT_FUNCTIONS = tuple(CATALOG)


def make_base(base_id: str):
    """Callable for a catalog entry; its optimum sits at the origin.

    The optimum value is dimension dependent (see ``base_optimum``); it is
    exactly 0 for every base except Schwefel, whose pre-composed offset
    leaves a residual below 1e-10 per coordinate.
    """
    if base_id not in CATALOG:
        raise KeyError(f"unknown base function {base_id!r}; known: {sorted(CATALOG)}")
    return CATALOG[base_id]


def base_optimum(base_id: str, dim: int) -> float:
    fn = make_base(base_id)
    return float(fn(np.zeros((1, dim)))[0])


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal matrix from QR of a Gaussian draw (det sign unconstrained)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class ProblemInstance:
    base_id: str
    dim: int
    shift: np.ndarray          # z, within [-80, 80]^D
    rotation: np.ndarray       # M, orthogonal D x D
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    y_opt: float = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray | float:
        return evaluate_problem(self, x)


def evaluate_problem(inst: ProblemInstance, x: np.ndarray):
    """f_base(M^T (x + z)), vectorized over rows; scalar in, scalar out."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != inst.dim:
        raise ValueError(f"expected dimension {inst.dim}, got {x.shape[1]}")
    z = (x + inst.shift) @ inst.rotation
    values = CATALOG[inst.base_id](z)
    return float(values[0]) if single else values


def make_instance(base_id: str, dim: int, rng: np.random.Generator,
                  bounds: tuple[float, float] = DEFAULT_BOUNDS) -> ProblemInstance:
    if base_id not in CATALOG:
        raise KeyError(f"unknown base function {base_id!r}")
    shift = rng.uniform(-SHIFT_RANGE, SHIFT_RANGE, size=dim)
    rotation = random_rotation(dim, rng)
    return ProblemInstance(base_id, dim, shift, rotation, bounds,
                           y_opt=base_optimum(base_id, dim))


def instance_from_seed(base_id: str, dim: int, seed: int,
                       bounds: tuple[float, float] = DEFAULT_BOUNDS) -> ProblemInstance:
    return make_instance(base_id, dim, np.random.default_rng(seed), bounds)


def save_manifest(path, entries, bounds: tuple[float, float] = DEFAULT_BOUNDS) -> None:
    """Write a suite manifest: a list of (base id, seed, dim) records."""
    doc = {
        "version": 1,
        "bounds": list(bounds),
        "instances": [{"base": b, "seed": int(s), "dim": int(d)} for b, s, d in entries],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_manifest(path) -> list[ProblemInstance]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported manifest version {doc.get('version')!r}")
    bounds = tuple(doc.get("bounds", DEFAULT_BOUNDS))
    return [instance_from_seed(e["base"], e["dim"], e["seed"], bounds)
            for e in doc["instances"]]


def generate_manifest_entries(count: int, dim: int, seed: int,
                              functions=DEFAULT_FUNCTIONS):
    """Reproducible (base, seed, dim) triples cycling a master seed."""
    rng = np.random.default_rng(seed)
    entries = []
    for _ in range(count):
        base = functions[int(rng.integers(0, len(functions)))]
        entries.append((base, int(rng.integers(0, 2 ** 31 - 1)), dim))
    return entries
