"""Central finite-difference verification of tape gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, no_grad


class GradCheckError(ArithmeticError):
    pass


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: tuple  # (input name, flat coordinate)
    n_coords: int
    analytic: dict
    numeric: dict

    def passed(self, tol=1e-4):
        return self.max_rel_error < tol


def _rel_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def _scalar(value, where):
    v = float(value.data if isinstance(value, Tensor) else value)
    if not np.isfinite(v):
        raise GradCheckError(f"non-finite output {v} while perturbing {where}")
    return v


def _check(evaluate, arrays, analytic, h, coords):
    numeric = {}
    worst, worst_at, count = 0.0, None, 0
    for name, arr in arrays.items():
        flat = arr.reshape(-1)
        idx = coords[name] if coords and name in coords else range(flat.size)
        num = np.zeros(flat.size)
        for i in idx:
            orig = flat[i]
            up, down = orig + h, orig - h
            with no_grad():
                flat[i] = up
                fp = _scalar(evaluate(), (name, i))
                flat[i] = down
                fm = _scalar(evaluate(), (name, i))
            flat[i] = orig
            # divide by the step actually taken, which is exact in floating point
            num[i] = (fp - fm) / (up - down)
            err = _rel_error(analytic[name].reshape(-1)[i], num[i])
            count += 1
            if err > worst or worst_at is None:
                worst, worst_at = float(err), (name, int(i))
        numeric[name] = num.reshape(arr.shape)
    return GradCheckReport(worst, worst_at, count, analytic, numeric)


def grad_check(fn, inputs, h=1e-5, coords=None):
    """Check d fn / d inputs against central differences.

    ``fn`` returns a scalar Tensor. ``inputs`` is one array, passed
    positionally and reported as ``"x"``, or a dict of arrays passed as
    keyword Tensors. ``coords`` maps an input name to flat coordinates to
    probe (default: all).
    """
    if not isinstance(inputs, dict):
        inputs = {"x": inputs}
        single = fn
        fn = lambda x: single(x)  # noqa: E731
    arrays = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    leaves = {k: Tensor(v.copy(), requires_grad=True) for k, v in arrays.items()}
    out = fn(**leaves)
    _scalar(out, "base point")
    out.backward()
    analytic = {k: t.grad.copy() for k, t in leaves.items()}

    def evaluate():
        return fn(**{k: Tensor(v) for k, v in arrays.items()})

    return _check(evaluate, arrays, analytic, h, coords)


def param_grad_check(loss_fn, params, h=1e-5, names=None, max_coords=None, rng=None):
    """Check a loss closure against perturbations of named parameters, in place.

    With ``max_coords`` set, at most that many coordinates per tensor are
    probed, drawn from ``rng``.
    """
    names = list(params.names()) if names is None else list(names)
    params.zero_grad()
    out = loss_fn()
    _scalar(out, "base point")
    out.backward()
    analytic = {n: params[n].grad.copy() for n in names}
    arrays = {n: params[n].data for n in names}
    coords = None
    if max_coords is not None:
        coords = {}
        for n in names:
            size = arrays[n].size
            coords[n] = (range(size) if size <= max_coords
                         else sorted(int(i) for i in rng.choice(size, max_coords)))
    report = _check(loss_fn, arrays, analytic, h, coords)
    params.zero_grad()
    return report
