import numpy as np

from .core import Bounds, ObjectiveSpec


def sphere(x) -> float:
    x = np.asarray(x)
    return float(np.dot(x, x))


def rosenbrock(x) -> float:
    x = np.asarray(x)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def rastrigin(x) -> float:
    x = np.asarray(x)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


BENCHMARKS = {
    "sphere": (sphere, 5.12),
    "rosenbrock": (rosenbrock, 5.0),
    "rastrigin": (rastrigin, 5.12),
}


def benchmark(name: str, dim: int, noise_sigma: float = 0.0) -> tuple[ObjectiveSpec, Bounds]:
    """Minimized benchmark objective and its standard symmetric box.

    With ``noise_sigma > 0`` each sample carries additive Gaussian noise.
    """
    fn, half_width = BENCHMARKS[name]
    bounds = Bounds.box(dim, -half_width, half_width)
    if noise_sigma == 0:
        return ObjectiveSpec(dim, lambda x, stream: fn(x), True, name), bounds

    def noisy(x, stream):
        return fn(x) + float(stream.gaussian(1, 0.0, noise_sigma)[0])

    return ObjectiveSpec(dim, noisy, False, f"{name}+noise{noise_sigma:g}"), bounds
