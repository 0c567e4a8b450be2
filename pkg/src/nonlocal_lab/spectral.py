"""One-dimensional corner model problems with a complex parameter.

The pencil is phi'' - lambda^2 phi = 0 on (-omega0, omega0) together with
either the two-point nonlocal conditions

    phi(-omega0) - (1+t) phi(0) = 0,      phi(omega0) - (1-t) phi(0) = 0

or pure Dirichlet conditions phi(+-omega0) = 0.  Everything is expressed in
the regularized fundamental basis {cosh(lambda w), sinh(lambda w)/lambda},
which is entire in lambda and degenerates to {1, w} at lambda = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpectralError",
    "ModelProblem",
    "Strip",
    "Eigenpair",
    "EigenvalueHit",
    "AssociateVector",
    "char_det",
    "condition_matrix",
    "eigenvalues_in_strip",
    "eigenvector",
    "associate_vector",
    "associate_system_residual",
    "det_zero_order",
]


class SpectralError(RuntimeError):
    """Root search or eigenvector extraction failed."""


@dataclass(frozen=True)
class ModelProblem:
    omega0: float
    t: complex = 0.0
    kind: str = "nonlocal"  # or "dirichlet"

    def __post_init__(self):
        if not 0.0 < self.omega0 < math.pi:
            raise ValueError(f"omega0 must lie in (0, pi), got {self.omega0}")
        if self.kind not in ("nonlocal", "dirichlet"):
            raise ValueError(f"unknown model problem kind {self.kind!r}")


@dataclass(frozen=True)
class Strip:
    """Search window: imag_min <= Im(lambda) <= imag_max, |Re(lambda)| <= real_bound."""

    imag_min: float
    imag_max: float
    real_bound: float = 2.0

    def __post_init__(self):
        if not self.imag_min < self.imag_max:
            raise ValueError("need imag_min < imag_max")
        if self.real_bound <= 0:
            raise ValueError("need real_bound > 0")


def _sinhc(z):
    """sinh(z)/z, entire; series near the origin."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-4
    zs = z[small]
    out[small] = 1.0 + zs ** 2 / 6.0 + zs ** 4 / 120.0
    zb = z[~small]
    out[~small] = np.sinh(zb) / zb
    return out


def basis_values(lam, w):
    """Values of the regularized basis {cosh(lam*w), sinh(lam*w)/lam} at w."""
    lam = np.asarray(lam, dtype=complex)
    w = np.asarray(w, dtype=float)
    z = lam * w
    return np.cosh(z), w * _sinhc(z)


def condition_matrix(problem: ModelProblem, lam):
    """2x2 matrix of the boundary/nonlocal conditions on the regularized basis.

    Vectorized: for an array of lambdas the result has shape (..., 2, 2).
    """
    lam = np.asarray(lam, dtype=complex)
    om = problem.omega0
    c = np.cosh(lam * om)
    s = om * _sinhc(lam * om)  # = sinh(lam*om)/lam
    M = np.empty(lam.shape + (2, 2), dtype=complex)
    if problem.kind == "nonlocal":
        t = complex(problem.t)
        # e1(0) = 1, e2(0) = 0; e1(-om) = c, e2(-om) = -s
        M[..., 0, 0] = c - (1.0 + t)
        M[..., 0, 1] = -s
        M[..., 1, 0] = c - (1.0 - t)
        M[..., 1, 1] = s
    else:
        M[..., 0, 0] = c
        M[..., 0, 1] = -s
        M[..., 1, 0] = c
        M[..., 1, 1] = s
    return M


def char_det(problem: ModelProblem, lam):
    """Characteristic determinant; entire in lambda, scalar or array."""
    scalar = np.isscalar(lam) or np.asarray(lam).ndim == 0
    M = condition_matrix(problem, np.atleast_1d(np.asarray(lam, dtype=complex)))
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    return complex(det[0]) if scalar else det


# ---------------------------------------------------------------------------
# argument-principle machinery

class _BoundaryZero(Exception):
    pass


def _path_winding(f, path_fn, n0):
    """Winding number of f along a closed path, by adaptive phase tracking.

    Wrapped phase steps between consecutive samples must stay below 1.5 rad;
    offending intervals are bisected until they do, so silent 2*pi aliasing
    (a true step above pi) cannot slip through.
    """
    ts = np.linspace(0.0, 1.0, n0 + 1)
    for _ in range(14):
        vals = f(path_fn(ts))
        mags = np.abs(vals)
        if mags.min() < 1e-13 * max(mags.max(), 1e-300):
            raise _BoundaryZero
        steps = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(steps) > 1.5
        if not bad.any():
            total = steps.sum() / (2 * math.pi)
            if abs(total - round(total)) < 1e-3:
                return int(round(total))
            raise _BoundaryZero
        if len(ts) > 30000:
            raise _BoundaryZero
        mids = 0.5 * (ts[:-1][bad] + ts[1:][bad])
        ts = np.sort(np.concatenate([ts, mids]))
    raise _BoundaryZero


def _winding(f, x0, x1, y0, y1, n_side=128):
    """Number of zeros (with multiplicity) inside a rectangle."""
    w, h = x1 - x0, y1 - y0
    per = 2.0 * (w + h)
    b1 = w / per
    b2 = (w + h) / per
    b3 = (2 * w + h) / per

    def path(ts):
        ts = np.asarray(ts)
        z = np.empty(ts.shape, dtype=complex)
        m = ts <= b1
        z[m] = x0 + (ts[m] / b1) * w + 1j * y0
        m = (ts > b1) & (ts <= b2)
        z[m] = x1 + 1j * (y0 + (ts[m] - b1) / (b2 - b1) * h)
        m = (ts > b2) & (ts <= b3)
        z[m] = x1 - (ts[m] - b2) / (b3 - b2) * w + 1j * y1
        m = ts > b3
        z[m] = x0 + 1j * (y1 - (ts[m] - b3) / (1.0 - b3) * h)
        return z

    return _path_winding(f, path, 4 * n_side)


def _circle_winding(f, center, radius, n=512):
    def path(ts):
        return center + radius * np.exp(2j * math.pi * np.asarray(ts))

    return _path_winding(f, path, n)


def _cauchy_coeffs(f, center, radius, kmax, n=128):
    """Taylor coefficients a_0..a_kmax of f about center via an FFT circle.

    f(center + z) = sum_k a_k z^k, recovered from samples on |z| = radius.
    """
    th = np.arange(n) * (2 * math.pi / n)
    vals = f(center + radius * np.exp(1j * th))
    hat = np.fft.fft(vals) / n
    ks = np.arange(kmax + 1)
    return hat[: kmax + 1] / radius ** ks


def _refine_simple(f, z0, scale):
    z = z0
    best = (abs(f(np.array([z0]))[0]), z0)
    for _ in range(80):
        h = 1e-7 * max(1.0, abs(z))
        fz = f(np.array([z]))[0]
        dfz = (f(np.array([z + h]))[0] - f(np.array([z - h]))[0]) / (2 * h)
        if dfz == 0:
            break
        step = -fz / dfz
        z = z + step
        fz_new = abs(f(np.array([z]))[0])
        if fz_new < best[0]:
            best = (fz_new, z)
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            break
    return best[1]


def _refine_multiple(f, z0, m, scale):
    """Newton on the (m-1)-th derivative (simple zero there), via Cauchy circles.

    The circle radius stays O(1): Taylor coefficients from the FFT are exact
    for any radius, and a moderate one keeps roundoff out of the step.
    """
    z = z0
    r = min(0.1 * max(1.0, scale), 0.25)
    for _ in range(60):
        a = _cauchy_coeffs(f, z, r, m)
        if a[m] == 0:
            break
        step = -(a[m - 1] / a[m]) / m
        z = z + step
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            break
    return z


@dataclass(frozen=True)
class EigenvalueHit:
    lam: complex
    order: int
    residual: float


def det_zero_order(problem: ModelProblem, lam: complex, radius: float = 0.02) -> int:
    """Multiplicity of lam as a zero of the characteristic determinant."""
    f = lambda z: char_det(problem, z)
    for attempt in range(6):
        r = radius / 2 ** attempt
        try:
            c1 = _circle_winding(f, lam, r)
            c2 = _circle_winding(f, lam, r / 2)
        except _BoundaryZero:
            continue
        if c1 == c2:
            return c1
    raise SpectralError(f"could not stabilize zero order at lambda={lam}")


def eigenvalues_in_strip(problem: ModelProblem, strip: Strip,
                         sep_tol: float = 1e-3) -> list:
    """All zeros of the characteristic determinant in the closed window.

    Rectangle subdivision with argument-principle counting, then Newton
    refinement; zeros of multiplicity m are polished on the (m-1)-th Cauchy
    derivative so that multiple roots are located to full precision.
    """
    f = lambda z: char_det(problem, z)
    scale = max(1.0, strip.real_bound, abs(strip.imag_min), abs(strip.imag_max))

    roots = None
    # the window is expanded so boundary zeros land strictly inside; refined
    # roots are filtered back to the closed strip afterwards
    for delta in (1e-3, 2.3e-3, 5.1e-3, 1.17e-2):
        x0, x1 = -strip.real_bound - delta, strip.real_bound + delta
        y0, y1 = strip.imag_min - delta, strip.imag_max + delta
        try:
            total = _winding(f, x0, x1, y0, y1)
            roots = _search_cells(f, x0, x1, y0, y1, scale, sep_tol)
        except _BoundaryZero:
            continue
        if sum(m for _, m in roots) == total:
            break
        roots = None
    if roots is None:
        raise SpectralError(
            "argument-principle count did not stabilize; a zero may sit on the "
            "window boundary -- perturb the strip and retry")

    hits = []
    for z, m in roots:
        try:
            order = det_zero_order(problem, z, radius=min(0.05 * scale, 0.02))
        except SpectralError:
            order = m
        res = abs(char_det(problem, z))
        hits.append(EigenvalueHit(lam=z, order=order, residual=res))

    incl = 1e-12
    hits = [h for h in hits
            if strip.imag_min - incl <= h.lam.imag <= strip.imag_max + incl
            and abs(h.lam.real) <= strip.real_bound + incl]
    hits.sort(key=lambda h: (h.lam.imag, h.lam.real))
    return hits


def _search_cells(f, x0, x1, y0, y1, scale, sep_tol):
    out = []
    refine_cell = 0.1 * max(1.0, scale)
    stack = [(x0, x1, y0, y1, _winding(f, x0, x1, y0, y1))]
    guard = 0
    while stack:
        guard += 1
        if guard > 20000:
            raise SpectralError("cell subdivision limit exceeded")
        cx0, cx1, cy0, cy1, count = stack.pop()
        if count == 0:
            continue
        diam = max(cx1 - cx0, cy1 - cy0)
        z0 = complex(0.5 * (cx0 + cx1), 0.5 * (cy0 + cy1))
        if diam < sep_tol:
            # unseparable cluster: treat as one zero of multiplicity `count`
            out.append((_refine_multiple(f, z0, count, scale) if count > 1
                        else _refine_simple(f, z0, scale), count))
            continue
        if count == 1 and diam <= refine_cell:
            z = _refine_simple(f, z0, scale)
            if (cx0 - diam <= z.real <= cx1 + diam
                    and cy0 - diam <= z.imag <= cy1 + diam):
                out.append((z, 1))
                continue
            # Newton escaped the cell: keep subdividing instead
        for frac in (0.5, 0.47, 0.559, 0.41):
            try:
                if cx1 - cx0 >= cy1 - cy0:
                    xm = cx0 + frac * (cx1 - cx0)
                    kids = [(cx0, xm, cy0, cy1), (xm, cx1, cy0, cy1)]
                else:
                    ym = cy0 + frac * (cy1 - cy0)
                    kids = [(cx0, cx1, cy0, ym), (cx0, cx1, ym, cy1)]
                counted = [(k, _winding(f, *k)) for k in kids]
            except _BoundaryZero:
                continue
            if sum(c for _, c in counted) == count:
                stack.extend([(k[0], k[1], k[2], k[3], c) for k, c in counted])
                break
        else:
            raise SpectralError(
                f"could not split cell [{cx0},{cx1}]x[{cy0},{cy1}] without "
                "hitting a zero on the cut")
    # merge near-duplicates (multiple cells may refine to one cluster point)
    merged = []
    for z, m in sorted(out, key=lambda p: (p[0].imag, p[0].real)):
        if merged and abs(merged[-1][0] - z) < 1e-8 * scale:
            merged[-1] = (merged[-1][0], merged[-1][1] + m)
        else:
            merged.append((z, m))
    return merged


# ---------------------------------------------------------------------------
# eigenvectors and associate vectors

@dataclass
class Eigenpair:
    problem: ModelProblem
    lambda0: complex
    coeffs: tuple  # (A, B) in the regularized basis
    normalization: str
    residual: float
    chain: list = field(default_factory=list)

    def phi(self, w):
        e1, e2 = basis_values(self.lambda0, w)
        return self.coeffs[0] * e1 + self.coeffs[1] * e2


def eigenvector(problem: ModelProblem, lambda0: complex) -> Eigenpair:
    """Null vector of the condition matrix, normalized to phi(0)=1 when possible."""
    lam = complex(lambda0)
    M = condition_matrix(problem, lam)
    U, s, Vh = np.linalg.svd(M)
    smax = s[0] if s[0] > 0 else 1.0
    if s[-1] > 1e-8 * max(smax, 1.0):
        raise SpectralError(
            f"lambda={lam} is not an eigenvalue (condition matrix is regular, "
            f"sigma_min={s[-1]:.3e})")
    v = Vh[-1].conj()
    phi0 = v[0]  # phi(0) = A since e1(0)=1, e2(0)=0
    if abs(phi0) > 1e-8 * np.linalg.norm(v):
        v = v / phi0
        norm_tag = "phi(0)=1"
    else:
        grid = np.linspace(-problem.omega0, problem.omega0, 401)
        e1, e2 = basis_values(lam, grid)
        vals = v[0] * e1 + v[1] * e2
        k = int(np.argmax(np.abs(vals)))
        v = v / vals[k]
        norm_tag = "max-norm"
    res = float(np.max(np.abs(M @ v)))
    return Eigenpair(problem=problem, lambda0=lam, coeffs=(complex(v[0]), complex(v[1])),
                     normalization=norm_tag, residual=res)


def _gauss_grid(omega0, n=96):
    x, w = np.polynomial.legendre.leggauss(n)
    return x * omega0, w * omega0


@dataclass
class AssociateVector:
    """phi1 = ps*w*sinh(lam w) + pc*w*cosh(lam w) + C*cosh(lam w) + D*w*sinhc(lam w)."""

    pair: Eigenpair
    ps: complex
    pc: complex
    C: complex
    D: complex

    def value(self, w):
        lam = self.pair.lambda0
        w = np.asarray(w, dtype=float)
        z = lam * w
        e1, e2 = basis_values(lam, w)
        return (self.ps * w * np.sinh(z) + self.pc * w * np.cosh(z)
                + self.C * e1 + self.D * e2)

    def second_derivative(self, w):
        lam = self.pair.lambda0
        w = np.asarray(w, dtype=float)
        z = lam * w
        e1, e2 = basis_values(lam, w)
        return (self.ps * (2 * lam * np.cosh(z) + lam ** 2 * w * np.sinh(z))
                + self.pc * (2 * lam * np.sinh(z) + lam ** 2 * w * np.cosh(z))
                + lam ** 2 * (self.C * e1 + self.D * e2))

    def l2_norm(self):
        x, w = _gauss_grid(self.pair.problem.omega0)
        return float(np.sqrt(np.sum(w * np.abs(self.value(x)) ** 2)))

    def ode_residual(self):
        """max |phi1'' - lambda0^2 phi1 - 2 lambda0 phi0| on a grid."""
        x, _ = _gauss_grid(self.pair.problem.omega0)
        lam = self.pair.lambda0
        lhs = self.second_derivative(x) - lam ** 2 * self.value(x)
        rhs = 2 * lam * self.pair.phi(x)
        return float(np.max(np.abs(lhs - rhs)))

    def condition_residual(self):
        om = self.pair.problem.omega0
        vals = self.value(np.array([-om, 0.0, om]))
        pr = self.pair.problem
        if pr.kind == "nonlocal":
            t = complex(pr.t)
            r = [vals[0] - (1 + t) * vals[1], vals[2] - (1 - t) * vals[1]]
        else:
            r = [vals[0], vals[2]]
        return float(np.max(np.abs(r)))


def _associate_rhs(problem: ModelProblem, pair: Eigenpair):
    """Condition values of the particular solution of phi'' - l^2 phi = 2 l phi0."""
    lam = pair.lambda0
    A, B = pair.coeffs
    ps, pc = A, B / lam
    om = problem.omega0
    w = np.array([-om, 0.0, om])
    z = lam * w
    vals = ps * w * np.sinh(z) + pc * w * np.cosh(z)
    if problem.kind == "nonlocal":
        t = complex(problem.t)
        h = np.array([vals[0] - (1 + t) * vals[1], vals[2] - (1 - t) * vals[1]])
    else:
        h = np.array([vals[0], vals[2]])
    return (ps, pc), -h


def associate_system_residual(problem: ModelProblem, pair: Eigenpair) -> float:
    """Relative consistency residual of the associate-vector linear system.

    Zero (to roundoff) when an associate vector exists; order one when the
    system is inconsistent and the Jordan chain stops at the eigenvector.
    """
    if abs(pair.lambda0) < 1e-12:
        return 0.0
    _, b = _associate_rhs(problem, pair)
    M = condition_matrix(problem, pair.lambda0)
    x, *_ = np.linalg.lstsq(M, b, rcond=None)
    return float(np.linalg.norm(M @ x - b) / max(np.linalg.norm(b), 1e-300))


def associate_vector(problem: ModelProblem, pair: Eigenpair):
    """Least-norm associate vector modulo the eigenvector span, or None.

    At lambda0 = 0 the associate equation is homogeneous and the
    representative modulo the eigenvector is identically zero; it is returned
    as an explicit zero function.  When the 2x2 system is inconsistent (no
    associate vector exists) the result is None.
    """
    lam = pair.lambda0
    if abs(lam) < 1e-12:
        assoc = AssociateVector(pair=pair, ps=0.0, pc=0.0, C=0.0, D=0.0)
        pair.chain = []
        return assoc
    (ps, pc), b = _associate_rhs(problem, pair)
    M = condition_matrix(problem, lam)
    x, *_ = np.linalg.lstsq(M, b, rcond=None)
    res = np.linalg.norm(M @ x - b) / max(np.linalg.norm(b), 1e-300)
    if res > 1e-8:
        pair.chain = []
        return None
    assoc = AssociateVector(pair=pair, ps=ps, pc=pc, C=complex(x[0]), D=complex(x[1]))
    # least-norm representative: project out the eigenvector direction
    xg, wg = _gauss_grid(problem.omega0)
    phi0 = pair.phi(xg)
    phi1 = assoc.value(xg)
    proj = np.sum(wg * phi1 * np.conj(phi0)) / np.sum(wg * np.abs(phi0) ** 2)
    A, B = pair.coeffs
    assoc.C -= proj * A
    assoc.D -= proj * B
    pair.chain = [assoc]
    return assoc
