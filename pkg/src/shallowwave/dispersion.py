"""Linear dispersion relations of the model hierarchy.

Speeds are nondimensional: the long-wave speed is 1 for every model.
``phase_speed_*`` functions return c**2 unless their name says otherwise.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Iterable

import numpy as np
import scipy.linalg

from .core import EigenFailure, IllPosedMode, ValidationError, check_fractions

_SMALL_S = 1e-8


def tanh_ratio(s):
    """tanh(s)/s with the removable singularity at 0 filled in."""
    s = np.abs(np.asarray(s, dtype=float))
    out = np.empty_like(s)
    small = s < _SMALL_S
    s2 = s[small] ** 2
    out[small] = 1 - s2 / 3 + 2 * s2**2 / 15
    big = ~small
    out[big] = np.tanh(s[big]) / s[big]
    return out


def phase_speed_ww(k, mu):
    """Phase speed c(k) = sqrt(tanh(sqrt(mu) k) / (sqrt(mu) k)) of linear water waves."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValidationError("wavenumber must be nonnegative")
    return np.sqrt(tanh_ratio(np.sqrt(mu) * k))


def c2_ww(k, mu):
    return tanh_ratio(np.sqrt(mu) * np.abs(np.asarray(k, dtype=float)))


def phase_speed_abcd(k, mu, a, b, c, d):
    k2 = mu * np.asarray(k, dtype=float) ** 2
    den_b = 1 + b * k2
    den_d = 1 + d * k2
    if np.any(den_b <= 0) or np.any(den_d <= 0):
        raise IllPosedMode("abcd Helmholtz factor is not invertible at this wavenumber")
    c2 = (1 - a * k2) * (1 - c * k2) / (den_b * den_d)
    if np.any(c2 < 0):
        raise IllPosedMode("abcd system is linearly ill-posed (negative c^2)")
    return c2


def phase_speed_ik(k, mu):
    x = mu * np.asarray(k, dtype=float) ** 2
    return (1 + x / 15) / (1 + 2 * x / 5)


def tanh_ratio_taylor(n_terms: int) -> list[Fraction]:
    """Exact Taylor coefficients of s -> tanh(sqrt(s))/sqrt(s) at s = 0.

    Obtained by dividing the series of sinh(t)/t by that of cosh(t), both
    written in powers of s = t**2.
    """
    num = [Fraction(1, factorial(2 * n + 1)) for n in range(n_terms)]
    den = [Fraction(1, factorial(2 * n)) for n in range(n_terms)]
    out: list[Fraction] = []
    for n in range(n_terms):
        acc = num[n] - sum(out[j] * den[n - j] for j in range(n))
        out.append(acc / den[0])
    return out


def pade_from_taylor(coeffs, L: int, M: int):
    """[L/M] Pade approximant (numerator, denominator) from Taylor coefficients.

    Coefficients are returned lowest order first with the denominator
    normalised to 1 at the origin.
    """
    c = [Fraction(x) for x in coeffs]
    if len(c) < L + M + 1:
        raise ValidationError(f"need {L + M + 1} Taylor coefficients, got {len(c)}")

    def coef(i):
        return c[i] if i >= 0 else Fraction(0)

    # sum_{j=1..M} q_j c_{L+i-j} = -c_{L+i}, i = 1..M
    A = [[coef(L + i - j) for j in range(1, M + 1)] for i in range(1, M + 1)]
    rhs = [-coef(L + i) for i in range(1, M + 1)]
    q = _solve_exact(A, rhs)
    den = [Fraction(1)] + q
    num = [sum(den[j] * coef(i - j) for j in range(min(i, M) + 1)) for i in range(L + 1)]
    return num, den


def _solve_exact(A, b):
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[i][n] / M[i][i] for i in range(n)]


_PADE22 = pade_from_taylor(tanh_ratio_taylor(3), 1, 1)


def pade22_cww2(x):
    """[2/2] Pade approximant in k of c_ww**2, evaluated at x = mu*k**2.

    As c_ww**2 is a function of k**2, the [2/2] approximant in k is the
    [1/1] approximant in x.
    """
    x = np.asarray(x, dtype=float)
    num, den = _PADE22
    return (float(num[0]) + float(num[1]) * x) / (float(den[0]) + float(den[1]) * x)


def build_T_matrix(l) -> np.ndarray:
    """Symmetric coupling matrix of the multi-layer Boussinesq dispersive terms."""
    l = check_fractions(l)
    n = l.size
    # tail[m] = sum_{i > m} l_i (0-based)
    tail = np.concatenate([np.cumsum(l[::-1])[::-1][1:], [0.0]])
    T = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            m = max(j, k)
            T[j, k] = l[j] * l[k] * (0.5 * l[m] + tail[m])
        T[j, j] -= l[j] ** 3 / 6
    return T


def phase_speed_multilayer(k, mu, l) -> np.ndarray:
    """All N branches of c**2 for the linearised multi-layer Boussinesq system.

    Plane waves give (diag(l) + mu k^2 T) c V = l zeta and c zeta = l.V,
    i.e. the generalised eigenproblem (l l^T) V = c^2 (diag(l) + mu k^2 T) V.
    Only the leading ("gravity") branch is nonzero.
    """
    l = check_fractions(l)
    T = build_T_matrix(l)
    mass = np.diag(l) + mu * float(k) ** 2 * T
    try:
        vals = scipy.linalg.eigh(np.outer(l, l), mass, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    vals = np.where(np.abs(vals) < 1e-14, 0.0, vals)
    return np.sort(vals)[::-1]


def phase_speed_scalar(kind: str, k, mu, p: float | None = None):
    """Phase speed c (not squared) of the unidirectional models."""
    k2 = mu * np.asarray(k, dtype=float) ** 2
    kind = kind.lower()
    if kind == "kdv":
        return 1 - k2 / 6
    if kind == "bbm":
        return 1 / (1 + k2 / 6)
    if kind in ("kdvbbm", "kdv_bbm", "kdvbbmfamily"):
        if p is None:
            raise ValidationError("the KdV/BBM family needs p")
        den = 1 + (1 / 6 - p) * k2
        if np.any(den <= 0):
            raise IllPosedMode("KdV/BBM Helmholtz factor is not invertible")
        return (1 - p * k2) / den
    if kind == "whitham":
        return phase_speed_ww(k, mu)
    raise ValidationError(f"unknown scalar model {kind!r}")


@dataclass(frozen=True)
class DispersionSpec:
    """Tagged description of a model's linear dispersion."""

    kind: str
    params: dict = field(default_factory=dict)

    KINDS = (
        "water_waves", "nsw", "abcd", "sgn", "ik", "multilayer", "kdv", "bbm", "kdvbbm", "whitham",
    )

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in self.KINDS:
            raise ValidationError(f"unknown dispersion model {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "abcd":
            a, b, c, d = (self.params[x] for x in "abcd")
            if abs(a + b + c + d - 1 / 3) > 1e-12:
                raise ValidationError("abcd parameters must satisfy a+b+c+d = 1/3")
        if kind == "multilayer":
            check_fractions(self.params["l"])
        if kind == "kdvbbm" and "p" not in self.params:
            raise ValidationError("KdVBBM family needs p")

    def c2(self, k, mu):
        """Squared phase speed of the surface ("gravity") mode."""
        k = np.asarray(k, dtype=float)
        if self.kind == "water_waves":
            return c2_ww(k, mu)
        if self.kind == "nsw":
            return np.ones_like(k)
        if self.kind in ("abcd", "sgn"):
            a, b, c, d = (0, 0, 0, 1 / 3) if self.kind == "sgn" else (self.params[x] for x in "abcd")
            return phase_speed_abcd(k, mu, a, b, c, d)
        if self.kind == "ik":
            return phase_speed_ik(k, mu)
        if self.kind == "multilayer":
            flat = np.atleast_1d(k)
            out = np.array([phase_speed_multilayer(kk, mu, self.params["l"])[0] for kk in flat])
            return out.reshape(k.shape)
        return phase_speed_scalar(self.kind, k, mu, self.params.get("p")) ** 2


def dispersion_table(specs: Iterable[tuple[str, DispersionSpec]], mus, ks) -> list[dict]:
    rows = []
    for name, spec in specs:
        for mu in mus:
            ref = c2_ww(ks, mu)
            model = spec.c2(ks, mu)
            for k, cm, cw in zip(np.atleast_1d(ks), np.atleast_1d(model), np.atleast_1d(ref)):
                rows.append(dict(model=name, mu=mu, k=float(k), c2_model=float(cm),
                                 c2_ww=float(cw), abs_error=abs(float(cm) - float(cw))))
    return rows


def table_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["model", "mu", "k", "c2_model", "c2_ww", "abs_error"])
    writer.writeheader()
    for row in rows:
        writer.writerow({key: (repr(v) if isinstance(v, float) else v) for key, v in row.items()})
    return buf.getvalue()
