"""Piecewise-linear controls c = (u, n1, n2) on a uniform grid, box projection,
GA parameter encodings and the control regularizers."""
import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ControlBounds:
    u_max: float
    n_max: float

    def __post_init__(self):
        if not (self.u_max > 0 and self.n_max > 0):
            raise ValueError(f"bounds must be positive, got u_max={self.u_max}, n_max={self.n_max}")

    @property
    def lower(self):
        return np.array([-self.u_max, 0.0, 0.0])

    @property
    def upper(self):
        return np.array([self.u_max, self.n_max, self.n_max])


@dataclass(frozen=True)
class RegularizationSpec:
    gamma_u: float = 0.0
    gamma_n: float = 0.0
    delta_n: tuple = (1.0, 1.0)
    mode: str = "none"  # integral | sup-norm | jump-penalty | none

    def __post_init__(self):
        if self.gamma_u < 0 or self.gamma_n < 0:
            raise ValueError("regularization coefficients must be nonnegative")
        if len(self.delta_n) != 2 or min(self.delta_n) <= 0:
            raise ValueError(f"delta_n must be two positive numbers, got {self.delta_n}")
        if self.mode not in ("integral", "sup-norm", "jump-penalty", "none"):
            raise ValueError(f"unknown regularization mode {self.mode!r}")
        object.__setattr__(self, "delta_n", tuple(float(d) for d in self.delta_n))


@dataclass(frozen=True, eq=False)
class ControlSet:
    """Controls sampled at M + 1 uniform nodes on [0, support * T].

    Between nodes the controls are linear; for t > support * T they are zero
    (``support < 1`` gives the coherent-only class with a switched-off tail).
    """

    T: float
    samples: np.ndarray  # (3, M + 1): rows u, n1, n2
    bounds: ControlBounds
    support: float = 1.0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] != 3 or s.shape[1] < 2:
            raise ValueError(f"samples must have shape (3, M+1) with M >= 1, got {s.shape}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not 0 < self.support <= 1:
            raise ValueError(f"support must be in (0, 1], got {self.support}")
        if self.check:
            lo, hi = self.bounds.lower[:, None], self.bounds.upper[:, None]
            if np.any(s < lo) or np.any(s > hi):
                raise ValueError("control samples violate the box bounds")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "T", float(self.T))

    @property
    def M(self):
        return self.samples.shape[1] - 1

    @property
    def dt(self):
        return self.support * self.T / self.M

    @property
    def times(self):
        return np.linspace(0.0, self.support * self.T, self.M + 1)

    @property
    def u(self):
        return self.samples[0]

    @property
    def n1(self):
        return self.samples[1]

    @property
    def n2(self):
        return self.samples[2]

    def __call__(self, t):
        """Controls at time(s) t, shape (..., 3)."""
        t = np.asarray(t, dtype=float)
        nodes = self.times
        out = np.stack([np.interp(t, nodes, row) for row in self.samples], axis=-1)
        if self.support < 1:
            out = np.where((t > nodes[-1] * (1 + 1e-12))[..., None], 0.0, out)
        return out

    def replace(self, samples, check=None):
        return ControlSet(
            self.T, samples, self.bounds, self.support,
            check=self.check if check is None else check,
        )

    @classmethod
    def zeros(cls, T, M, bounds, support=1.0):
        return cls(T, np.zeros((3, M + 1)), bounds, support)

    @classmethod
    def constant(cls, T, M, bounds, value):
        v = np.broadcast_to(np.asarray(value, dtype=float), (3,))
        return cls(T, np.repeat(v[:, None], M + 1, axis=1), bounds)

    @classmethod
    def from_functions(cls, T, M, bounds, u=None, n1=None, n2=None, clip=True):
        t = np.linspace(0.0, T, M + 1)
        rows = [np.zeros_like(t) if f is None else np.broadcast_to(f(t), t.shape) for f in (u, n1, n2)]
        s = np.array(rows, dtype=float)
        if clip:
            s = project_samples(s, bounds)
        return cls(T, s, bounds)

    def to_json(self):
        return json.dumps(
            {
                "T": self.T,
                "M": self.M,
                "support": self.support,
                "bounds": {"u_max": self.bounds.u_max, "n_max": self.bounds.n_max},
                "u": self.u.tolist(),
                "n1": self.n1.tolist(),
                "n2": self.n2.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        b = ControlBounds(**d["bounds"])
        return cls(d["T"], np.array([d["u"], d["n1"], d["n2"]]), b, d.get("support", 1.0))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "u", "n1", "n2"])
            for row in zip(self.times, *self.samples):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def read_csv(cls, path, bounds):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        if not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=1e-12):
            raise ValueError(f"{path}: control grid is not uniform")
        return cls(t[-1], data[:, 1:].T, bounds)


def project_samples(samples, bounds):
    s = np.asarray(samples, dtype=float)
    return np.clip(s, bounds.lower[:, None], bounds.upper[:, None])


def project_box(c_raw, bounds, T=1.0, support=1.0):
    """Clamp raw (3, M+1) samples into the box and wrap them as a ControlSet."""
    s = np.asarray(c_raw, dtype=float)
    if s.ndim != 2 or s.shape[0] != 3:
        raise ValueError(f"expected three equal-length sequences, got shape {s.shape}")
    return ControlSet(T, project_samples(s, bounds), bounds, support)


@dataclass(frozen=True)
class GAEncoding:
    """Map between GA parameter vectors and ControlSets.

    Full layout is (u^0..u^M, n1^0..n1^M, n2^0..n2^M); ``coherent_only`` keeps
    only the u block (incoherent controls identically zero). With
    ``T_range`` set, T is appended as the last parameter.
    """

    M: int
    bounds: ControlBounds
    T: float = None
    T_range: tuple = None
    coherent_only: bool = False
    support: float = 1.0

    def __post_init__(self):
        if (self.T is None) == (self.T_range is None):
            raise ValueError("exactly one of T and T_range must be given")
        if self.T_range is not None and not (0 < self.T_range[0] <= self.T_range[1]):
            raise ValueError(f"bad T_range {self.T_range}")

    @property
    def n_controls(self):
        return (1 if self.coherent_only else 3) * (self.M + 1)

    @property
    def size(self):
        return self.n_controls + (self.T_range is not None)

    @property
    def lower(self):
        lo = np.repeat(self.bounds.lower[: 1 if self.coherent_only else 3], self.M + 1)
        if self.T_range is not None:
            lo = np.append(lo, self.T_range[0])
        return lo

    @property
    def upper(self):
        hi = np.repeat(self.bounds.upper[: 1 if self.coherent_only else 3], self.M + 1)
        if self.T_range is not None:
            hi = np.append(hi, self.T_range[1])
        return hi

    def encode(self, c: ControlSet):
        if c.M != self.M:
            raise ValueError(f"control grid has M={c.M}, encoding expects {self.M}")
        a = c.samples[:1].ravel() if self.coherent_only else c.samples.ravel()
        if self.T_range is not None:
            a = np.append(a, c.T)
        return a.copy()

    def decode(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != (self.size,):
            raise ValueError(f"parameter vector must have length {self.size}, got {a.shape}")
        a = np.clip(a, self.lower, self.upper)
        T = self.T if self.T_range is None else a[-1]
        body = a[: self.n_controls]
        if self.coherent_only:
            s = np.zeros((3, self.M + 1))
            s[0] = body
        else:
            s = body.reshape(3, self.M + 1)
        return ControlSet(T, s, self.bounds, self.support)


def ga_encode(c, encoding):
    return encoding.encode(c)


def ga_decode(a, encoding):
    return encoding.decode(a)


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def regularization_integral(c: ControlSet, spec: RegularizationSpec, times=None):
    """Trapezoidal integral of gamma_u u^2 + gamma_n (n1 + n2) over [0, T].

    ``times`` is the quadrature grid (default: control nodes refined 10x).
    """
    if spec.gamma_u == 0 and spec.gamma_n == 0:
        return 0.0
    if times is None:
        times = np.linspace(0.0, c.T, 10 * c.M * max(1, round(1 / c.support)) + 1)
    v = c(times)
    f = spec.gamma_u * v[:, 0] ** 2 + spec.gamma_n * (v[:, 1] + v[:, 2])
    return _trapezoid(f, times)


def regularization_supnorm(c: ControlSet, spec: RegularizationSpec):
    return float(
        spec.gamma_u * np.max(np.abs(c.u))
        + spec.gamma_n * (np.max(c.n1) + np.max(c.n2))
    )


def jump_excess(c: ControlSet, spec: RegularizationSpec):
    """max(max_s |n_j^{s+1} - n_j^s| - delta_j, 0) for j = 1, 2."""
    return tuple(
        max(float(np.max(np.abs(np.diff(n)) - d)), 0.0)
        for n, d in zip((c.n1, c.n2), spec.delta_n)
    )


def regularization_jumps(c: ControlSet, spec: RegularizationSpec):
    return float(spec.gamma_u * np.max(np.abs(c.u)) + spec.gamma_n * sum(jump_excess(c, spec)))
