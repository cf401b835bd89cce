"""Caratheodory-Fejer rational approximation of exp(x) on the negative real axis.

The approximant is kept in partial-fraction form

    r(x) = omega0 + sum_i omega_i / (x - tau_i)

so that r(A) B reduces to a family of shifted linear solves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.linalg import hankel, svd

__all__ = [
    "CfRational",
    "ReducedShifts",
    "CfError",
    "CfConstructionError",
    "NearPoleError",
    "cf_poles_residues",
    "builtin_cf14",
    "get_cf",
    "eval_cf",
    "conjugate_reduce",
    "assemble_exponential",
]

NU_MAX = 20

# transplant parameters: x = SCALE (t - 1) / (t + 1) maps t in [-1, 1] onto (-inf, 0]
SCALE = 9.0
NFFT = 4096
HANKEL_SIZE = 75

# residue collocation grid
N_COLLOCATION = 512
COLLOCATION_DECADES = (-4.0, 4.0)

REAL_POLE_TOL = 1e-10


class CfError(ValueError):
    """Invalid input to a CF routine."""


class CfConstructionError(RuntimeError):
    """The SVD construction produced an unusable pole set."""


class NearPoleError(CfError):
    pass


@dataclass(frozen=True, eq=False)
class CfRational:
    """Type-(nu, nu) rational function in partial-fraction form.

    Poles are sorted by imaginary part, ties by real part. Non-real poles
    come in exact conjugate pairs with exactly conjugate residues.
    """

    nu: int
    omega0: complex
    residues: np.ndarray
    poles: np.ndarray

    def __post_init__(self):
        residues = np.asarray(self.residues, dtype=complex)
        poles = np.asarray(self.poles, dtype=complex)
        if residues.shape != (self.nu,) or poles.shape != (self.nu,):
            raise CfError(f"expected {self.nu} poles and residues")
        residues.setflags(write=False)
        poles.setflags(write=False)
        object.__setattr__(self, "residues", residues)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "omega0", complex(self.omega0))

    def __eq__(self, other):
        if not isinstance(other, CfRational):
            return NotImplemented
        return (
            self.nu == other.nu
            and self.omega0 == other.omega0
            and np.array_equal(self.poles, other.poles)
            and np.array_equal(self.residues, other.residues)
        )

    __hash__ = object.__hash__

    def __call__(self, x):
        """Vectorised evaluation at an array of points (no pole check)."""
        x = np.asarray(x, dtype=complex)
        terms = self.residues / (x[..., None] - self.poles)
        return self.omega0 + terms.sum(axis=-1)

    def to_dict(self) -> dict:
        pair = lambda z: [float(z.real), float(z.imag)]  # noqa: E731
        return {
            "nu": self.nu,
            "omega0": pair(self.omega0),
            "residues": [pair(z) for z in self.residues],
            "poles": [pair(z) for z in self.poles],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CfRational":
        cplx = lambda v: complex(v[0], v[1])  # noqa: E731
        try:
            r = cls(
                nu=int(doc["nu"]),
                omega0=cplx(doc["omega0"]),
                residues=np.array([cplx(v) for v in doc["residues"]]),
                poles=np.array([cplx(v) for v in doc["poles"]]),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise CfError(f"malformed CF table: {exc}") from exc
        _check_conjugate_closure(r.poles, r.residues)
        return r

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def from_json(cls, path) -> "CfRational":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ReducedShifts:
    """Poles with Im >= 0 and their assembly weights.

    ``paired[j]`` is True when ``shifts[j]`` stands for a conjugate pair, in
    which case its term enters the sum as 2 Re(omega X).
    """

    shifts: np.ndarray
    residues: np.ndarray
    paired: np.ndarray
    index: np.ndarray  # positions of the retained poles in the full list


def _transplanted_hankel():
    w = np.exp(2j * np.pi * np.arange(NFFT) / NFFT)
    t = w.real
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.exp(SCALE * (t - 1.0) / (t + 1.0 + 1e-16))
    f[~np.isfinite(f)] = 0.0
    coeffs = np.real(np.fft.fft(f)) / NFFT
    return hankel(coeffs[1 : HANKEL_SIZE + 1])


def _locate_poles(nu: int) -> np.ndarray:
    _, s, vt = svd(_transplanted_hankel())
    v = vt[nu]
    # zeros of the reversed singular-vector polynomial inside the unit disk
    # are the reciprocals of the Blaschke poles; the map below is invariant
    # under q -> 1/q
    q = np.roots(v[::-1])
    q = q[np.abs(q) < 1.0]
    if q.size != nu:
        raise CfConstructionError(
            f"nu={nu}: found {q.size} zeros inside the unit disk "
            f"(singular value {s[nu]:.2e} is at rounding level)"
        )
    return SCALE * (q - 1.0) ** 2 / (q + 1.0) ** 2


def _symmetrise_poles(poles: np.ndarray) -> np.ndarray:
    """Snap near-real poles to the axis and make conjugate pairs exact."""
    poles = poles.copy()
    real = np.abs(poles.imag) <= REAL_POLE_TOL * (1.0 + np.abs(poles))
    poles[real] = poles[real].real
    upper = poles[~real & (poles.imag > 0)]
    lower = list(poles[~real & (poles.imag < 0)])
    if len(upper) != len(lower):
        raise CfConstructionError("complex poles do not pair up")
    for z in upper:
        j = int(np.argmin([abs(np.conj(z) - y) for y in lower]))
        if abs(np.conj(z) - lower[j]) > 1e-8 * (1.0 + abs(z)):
            raise CfConstructionError(f"pole {z} has no conjugate partner")
        lower.pop(j)
    out = np.concatenate([upper, np.conj(upper), poles[real]])
    return out[np.lexsort((out.real, out.imag))]


def _check_pole_set(poles: np.ndarray) -> None:
    on_axis = (poles.imag == 0) & (poles.real <= 0)
    if np.any(on_axis):
        raise CfConstructionError(f"pole on the closed negative axis: {poles[on_axis]}")
    gaps = np.abs(poles[:, None] - poles[None, :]) + np.eye(poles.size)
    if poles.size > 1 and gaps.min() < 1e-10:
        raise CfConstructionError("duplicate poles")


def _fit_residues(poles: np.ndarray):
    """Least-squares collocation of omega0 + sum omega_i/(x - tau_i) against exp."""
    x = np.concatenate([[0.0], -np.logspace(*COLLOCATION_DECADES, N_COLLOCATION - 1)])
    upper = np.flatnonzero(poles.imag > 0)
    real = np.flatnonzero(poles.imag == 0)
    cols = [np.ones_like(x)]
    for i in upper:
        g = 1.0 / (x - poles[i])
        cols += [2.0 * g.real, -2.0 * g.imag]
    for i in real:
        cols.append(1.0 / (x - poles[i].real))
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), np.exp(x), rcond=None)

    residues = np.zeros(poles.size, dtype=complex)
    for j, i in enumerate(upper):
        residues[i] = complex(coef[1 + 2 * j], coef[2 + 2 * j])
        partner = np.flatnonzero(poles == np.conj(poles[i]))[0]
        residues[partner] = np.conj(residues[i])
    residues[real] = coef[1 + 2 * upper.size :]
    return complex(coef[0]), residues


def cf_poles_residues(nu: int) -> CfRational:
    """Construct the type-(nu, nu) CF approximant to exp on (-inf, 0].

    Parameters
    ----------
    nu : int
        Degree, 1 <= nu <= 20. In double precision the construction only
        resolves nu <= 16; larger degrees raise CfConstructionError.

    Returns
    -------
    CfRational
    """
    if not isinstance(nu, (int, np.integer)) or not 1 <= nu <= NU_MAX:
        raise CfError(f"nu must be an integer in [1, {NU_MAX}], got {nu!r}")
    nu = int(nu)
    poles = _symmetrise_poles(_locate_poles(nu))
    _check_pole_set(poles)
    omega0, residues = _fit_residues(poles)
    return CfRational(nu=nu, omega0=omega0, residues=residues, poles=poles)


def builtin_cf14() -> CfRational:
    """Frozen nu=14 table shipped with the package."""
    text = resources.files("cfexpm").joinpath("data/cf14.json").read_text()
    return CfRational.from_dict(json.loads(text))


def get_cf(nu: int = 14) -> CfRational:
    return builtin_cf14() if nu == 14 else cf_poles_residues(nu)


def eval_cf(r: CfRational, x: complex) -> complex:
    x = complex(x)
    dist = np.abs(x - r.poles)
    bad = dist < 1e-14 * (1.0 + np.abs(r.poles))
    if np.any(bad):
        raise NearPoleError(f"x={x} is within rounding distance of pole {r.poles[bad][0]}")
    terms = r.residues / (x - r.poles)
    re = math.fsum([r.omega0.real, *terms.real])
    im = math.fsum([r.omega0.imag, *terms.imag])
    return complex(re, im)


def _check_conjugate_closure(poles, residues) -> None:
    for z, w in zip(poles, residues):
        if z.imag == 0:
            continue
        hit = np.flatnonzero(poles == np.conj(z))
        if hit.size != 1 or residues[hit[0]] != np.conj(w):
            raise CfError(f"pole {z} lacks an exact conjugate partner")


def conjugate_reduce(r: CfRational) -> ReducedShifts:
    """Keep one pole per conjugate pair (the one with Im > 0) plus real poles."""
    poles, residues = np.asarray(r.poles), np.asarray(r.residues)
    _check_conjugate_closure(poles, residues)
    keep = np.flatnonzero(poles.imag >= 0)
    return ReducedShifts(
        shifts=poles[keep].copy(),
        residues=residues[keep].copy(),
        paired=poles[keep].imag > 0,
        index=keep,
    )


def assemble_exponential(r: CfRational, B, solutions, reduced: ReducedShifts | None = None):
    """Return Re(omega0 B + sum_i omega_i X_i).

    With ``reduced`` given, ``solutions`` are aligned with ``reduced.shifts``
    and conjugate-pair terms are doubled; otherwise they align with
    ``r.poles``.
    """
    B = np.asarray(B)
    if reduced is None:
        residues, weights = r.residues, np.ones(r.nu)
    else:
        residues, weights = reduced.residues, np.where(reduced.paired, 2.0, 1.0)
    if len(solutions) != len(residues):
        raise CfError(f"expected {len(residues)} solution blocks, got {len(solutions)}")
    for X in solutions:
        if np.shape(X) != B.shape:
            raise CfError(f"solution block shape {np.shape(X)} != {B.shape}")
    # Terms cancel down to ~1e-13 of their size on stiff problems, so every
    # entry is summed exactly over the split real products.
    B = np.asarray(B, dtype=float)
    terms = [r.omega0.real * B]
    for w, c, X in zip(weights, residues, solutions):
        X = np.asarray(X, dtype=complex)
        terms.append(w * (c.real * X.real))
        terms.append(-w * (c.imag * X.imag))
    stacked = np.stack(terms).reshape(len(terms), -1)
    Z = np.array([math.fsum(col) for col in stacked.T]).reshape(B.shape)
    return Z
