"""Splitting programs: ordered lists of elementary exponential factors.

A :class:`SplitStep` is one of the eight computable operator kinds

==================  =============================  =====================
kind                operator                        parameters
==================  =============================  =====================
translate           e^{alpha d/dx_j}               axis j, alpha
modulate            e^{i alpha x_j}                axis j, alpha
fourier_quadratic   e^{i a(grad)}  (mult e^{-ia})  symmetric matrix a
x_quadratic         e^{i a(x)}                     symmetric matrix a
shear               e^{alpha x_k d/dx_j}           axis j, source k, alpha
gaussian_x          e^{-b(x)},      b PSD          symmetric matrix b
gaussian_fourier    e^{b(grad)} (mult e^{-b(xi)})  symmetric matrix b
scalar              e^{gamma}                      gamma complex
==================  =============================  =====================

Step coefficients always carry the full time dependence (they are
nonlinear functions of the step size), so every step corresponds to a
time-1 symbol via :func:`step_symbol`.

``SplittingProgram.steps`` is stored in *execution order*: the first
list element is the first factor applied to a field, i.e. the rightmost
factor of the usual operator-product notation.  Serialization writes
the same order.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .symplectic import QuadraticSymbol, build_symbol

__all__ = [
    "STEP_KINDS",
    "SplitStep",
    "SplittingProgram",
    "translate",
    "modulate",
    "fourier_quadratic",
    "x_quadratic",
    "shear",
    "gaussian_x",
    "gaussian_fourier",
    "scalar",
    "step_symbol",
]

STEP_KINDS = (
    "translate",
    "modulate",
    "fourier_quadratic",
    "x_quadratic",
    "shear",
    "gaussian_x",
    "gaussian_fourier",
    "scalar",
)

_PSD_TOL = 1e-12


@dataclass(frozen=True)
class SplitStep:
    kind: str
    axis: int = None
    source: int = None
    alpha: float = None
    matrix: np.ndarray = None
    gamma: complex = None

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown step kind {self.kind!r}")
        if self.kind in ("translate", "modulate"):
            if self.axis is None or self.alpha is None:
                raise ValueError(f"{self.kind} needs axis and alpha")
        elif self.kind == "shear":
            if self.axis is None or self.source is None or self.alpha is None:
                raise ValueError("shear needs axis, source and alpha")
            if self.axis == self.source:
                raise ValueError("shear axes must differ")
        elif self.kind == "scalar":
            if self.gamma is None:
                raise ValueError("scalar needs gamma")
            object.__setattr__(self, "gamma", complex(self.gamma))
        else:
            if self.matrix is None:
                raise ValueError(f"{self.kind} needs a coefficient matrix")
            m = np.array(self.matrix, dtype=float)
            if m.ndim == 0:
                m = m.reshape(1, 1)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("coefficient matrix must be square")
            m = (m + m.T) / 2.0
            if self.kind in ("gaussian_x", "gaussian_fourier"):
                if np.linalg.eigvalsh(m).min(initial=0.0) < -_PSD_TOL:
                    raise ValueError(f"{self.kind} matrix must be PSD (>= -{_PSD_TOL})")
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)
        if self.alpha is not None:
            object.__setattr__(self, "alpha", float(self.alpha))

    def is_identity(self, tol: float = 0.0) -> bool:
        if self.kind == "scalar":
            return abs(self.gamma) <= tol
        if self.alpha is not None:
            return abs(self.alpha) <= tol
        return np.abs(self.matrix).max(initial=0.0) <= tol

    def to_record(self) -> dict:
        rec = {"kind": self.kind}
        if self.axis is not None:
            rec["axis"] = int(self.axis)
        if self.source is not None:
            rec["source"] = int(self.source)
        if self.alpha is not None:
            rec["alpha"] = self.alpha
        if self.matrix is not None:
            rec["matrix"] = self.matrix.tolist()
        if self.gamma is not None:
            rec["gamma"] = [self.gamma.real, self.gamma.imag]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "SplitStep":
        gamma = rec.get("gamma")
        if gamma is not None:
            gamma = complex(gamma[0], gamma[1])
        return cls(
            kind=rec["kind"],
            axis=rec.get("axis"),
            source=rec.get("source"),
            alpha=rec.get("alpha"),
            matrix=np.array(rec["matrix"]) if "matrix" in rec else None,
            gamma=gamma,
        )


# shorthand constructors
def translate(axis, alpha):
    return SplitStep("translate", axis=axis, alpha=alpha)


def modulate(axis, alpha):
    return SplitStep("modulate", axis=axis, alpha=alpha)


def fourier_quadratic(matrix):
    return SplitStep("fourier_quadratic", matrix=matrix)


def x_quadratic(matrix):
    return SplitStep("x_quadratic", matrix=matrix)


def shear(axis, source, alpha):
    return SplitStep("shear", axis=axis, source=source, alpha=alpha)


def gaussian_x(matrix):
    return SplitStep("gaussian_x", matrix=matrix)


def gaussian_fourier(matrix):
    return SplitStep("gaussian_fourier", matrix=matrix)


def scalar(gamma):
    return SplitStep("scalar", gamma=gamma)


def step_symbol(step: SplitStep, n: int) -> QuadraticSymbol:
    """Time-1 symbol s with step operator == e^{-s^w}."""
    if step.kind == "translate":
        y = np.zeros(2 * n, dtype=complex)
        y[n + step.axis] = -1j * step.alpha
        return QuadraticSymbol(n, np.zeros((2 * n, 2 * n)), y, 0.0)
    if step.kind == "modulate":
        y = np.zeros(2 * n, dtype=complex)
        y[step.axis] = -1j * step.alpha
        return QuadraticSymbol(n, np.zeros((2 * n, 2 * n)), y, 0.0)
    if step.kind == "fourier_quadratic":
        return build_symbol(n, xixi=1j * step.matrix)
    if step.kind == "x_quadratic":
        return build_symbol(n, xx=-1j * step.matrix)
    if step.kind == "gaussian_x":
        return build_symbol(n, xx=step.matrix.astype(complex))
    if step.kind == "gaussian_fourier":
        return build_symbol(n, xixi=step.matrix.astype(complex))
    if step.kind == "shear":
        q = np.zeros((2 * n, 2 * n), dtype=complex)
        q[step.source, n + step.axis] = -1j * step.alpha / 2.0
        q[n + step.axis, step.source] = -1j * step.alpha / 2.0
        return QuadraticSymbol(n, q, np.zeros(2 * n), 0.0)
    if step.kind == "scalar":
        return QuadraticSymbol.constant(n, -step.gamma)
    raise ValueError(step.kind)


@dataclass
class SplittingProgram:
    """An ordered factorization of e^{-t p^w} into elementary steps.

    ``target`` is the symbol p (or None for pure composition targets,
    in which case ``target_map`` holds the n x n matrix G with program
    action u -> u o G).  ``steps`` is in execution order.
    """

    n: int
    t: float
    steps: list
    target: QuadraticSymbol = None
    target_map: np.ndarray = None
    provenance: str = ""
    iteration_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.target is None and self.target_map is None:
            raise ValueError("program needs a target symbol or a target map")
        if self.target_map is not None:
            self.target_map = np.array(self.target_map, dtype=float)

    def step_count(self) -> int:
        return len(self.steps)

    def absorbed_target(self) -> QuadraticSymbol:
        """Target symbol scaled by t (the time-1 symbol of e^{-t p^w})."""
        if self.target is None:
            raise ValueError("program has a composition-map target")
        return self.target.scaled(self.t)

    # -- serialization: steps listed in execution order ----------------
    def to_text(self) -> str:
        doc = {
            "format": "exactsplit-program-1",
            "dim": self.n,
            "t": self.t,
            "provenance": self.provenance,
            "target": self.target.to_record() if self.target is not None else None,
            "target_map": self.target_map.tolist() if self.target_map is not None else None,
            "steps": [s.to_record() for s in self.steps],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_text(cls, text: str) -> "SplittingProgram":
        doc = json.loads(text)
        if doc.get("format") != "exactsplit-program-1":
            raise ValueError("not an exactsplit program document")
        target = QuadraticSymbol.from_record(doc["target"]) if doc.get("target") else None
        tmap = np.array(doc["target_map"]) if doc.get("target_map") else None
        steps = [SplitStep.from_record(r) for r in doc["steps"]]
        return cls(
            n=int(doc["dim"]),
            t=float(doc["t"]),
            steps=steps,
            target=target,
            target_map=tmap,
            provenance=doc.get("provenance", ""),
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "SplittingProgram":
        with open(path) as fh:
            return cls.from_text(fh.read())
