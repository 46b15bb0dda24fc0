"""Dirichlet solver on a flat periodic cylinder [0, l] x S^1.

The operator is a perturbation of the flat Laplacian,

    L v = Delta_chi v + A . grad v + B v,

with chi a metric, A a drift field and B a potential, all sampled on the
grid.  The flat part is inverted mode by mode (FFT in the periodic
coordinate, 6th-order stencils in s); the circle-average component, which
carries the near-zero eigenvalues of a long cylinder, is integrated
directly from the far end.  The perturbed problem is solved by the
alternating Neumann iteration: each residual of the perturbation is fed
back through the flat inverse until the weighted norm of the increments
contracts below tolerance.
"""

import numpy as np
from scipy.sparse import csc_matrix, identity, lil_matrix
from scipy.sparse.linalg import splu

from .ou import derivative_matrices

__all__ = [
    "PerturbationTooLargeError",
    "CylinderSolution",
    "cylinder_grid",
    "perturbation_size",
    "apply_operator",
    "cylinder_solve",
]


class PerturbationTooLargeError(ValueError):
    """The Neumann iteration does not contract for this perturbation."""


def cylinder_grid(l: float = 10.0, n_s: int = 400, n_z: int = 64):
    """Grid (s, z) with s in [0, l] inclusive and z periodic on [0, 2pi)."""
    if l <= 10.0 - 1e-12:
        raise ValueError("cylinder length must be at least 10")
    if n_s < 16 or n_z < 8:
        raise ValueError("grid too coarse for the stencils")
    s = np.linspace(0.0, l, n_s + 1)
    z = np.arange(n_z) * (2.0 * np.pi / n_z)
    return s, z


def _dz(field, order=1):
    """Spectral derivative along the periodic axis (last axis)."""
    n_z = field.shape[-1]
    m = np.fft.rfftfreq(n_z, d=1.0 / n_z)
    return np.fft.irfft((1j * m) ** order * np.fft.rfft(field, axis=-1),
                        n=n_z, axis=-1)


class _FlatOperator:
    """Per-mode LU factors of the flat Laplacian on [0, l] x S^1."""

    def __init__(self, s, n_z):
        self.s = s
        self.n_z = n_z
        self.D1, self.D2 = derivative_matrices(s)
        n = len(s)
        self.modes = np.fft.rfftfreq(n_z, d=1.0 / n_z)
        self._lu = {}
        for m in self.modes:
            A = lil_matrix(self.D2 - m**2 * identity(n))
            if m == 0:
                # average part: conditions u(l) = 0, u'(l) = 0 close the
                # double integral from the far end; row 0 hosts the slope
                # condition so every interior row keeps the PDE stencil
                A[0] = self.D1[n - 1]
            else:
                A[0] = 0.0
                A[0, 0] = 1.0
            A[n - 1] = 0.0
            A[n - 1, n - 1] = 1.0
            self._lu[m] = splu(csc_matrix(A))

    def laplacian(self, u):
        return self.D2 @ u + _dz(u, order=2)

    def solve(self, f_modes, E):
        """Flat solve: Delta u = E with u = f on s=0 (zero-average modes),
        u(l) = 0, and the circle average integrated from the far end."""
        n = len(self.s)
        Eh = np.fft.rfft(E, axis=-1)
        uh = np.empty_like(Eh)
        for i, m in enumerate(self.modes):
            rhs = Eh[:, i].copy()
            if m == 0:
                rhs[0] = 0.0
            else:
                rhs[0] = f_modes[i] * self.n_z  # rfft scaling of f
            rhs[n - 1] = 0.0
            lu = self._lu[m]
            uh[:, i] = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
        return np.fft.irfft(uh, n=self.n_z, axis=-1)


class _Perturbation:
    """L - Delta_{g0} assembled from grid samples of (chi, A, B)."""

    def __init__(self, flat, chi, drift, potential):
        n, n_z = len(flat.s), flat.n_z
        eye = np.zeros((n, n_z, 2, 2))
        eye[..., 0, 0] = 1.0
        eye[..., 1, 1] = 1.0
        self.chi = eye if chi is None else np.asarray(chi, dtype=float)
        self.drift = (np.zeros((n, n_z, 2)) if drift is None
                      else np.asarray(drift, dtype=float))
        self.potential = (np.zeros((n, n_z)) if potential is None
                          else np.asarray(potential, dtype=float))
        if self.chi.shape != (n, n_z, 2, 2):
            raise ValueError("metric samples must have shape (n_s+1, n_z, 2, 2)")
        if self.drift.shape != (n, n_z, 2):
            raise ValueError("drift samples must have shape (n_s+1, n_z, 2)")
        if self.potential.shape != (n, n_z):
            raise ValueError("potential samples must have shape (n_s+1, n_z)")
        self.flat = flat
        inv = np.linalg.inv(self.chi)
        self.inv = inv

        def grad(fld):
            # gradient of each scalar grid sample in fld's trailing axes
            flat2 = fld.reshape(n, n_z, -1)
            g = np.stack([np.stack([flat.D1 @ flat2[..., i],
                                    _dz(flat2[..., i])], axis=-1)
                          for i in range(flat2.shape[-1])], axis=2)
            return g.reshape(fld.shape + (2,))

        # first-order coefficient b^j = d_i chi^{ij} + chi^{kj} Gamma^i_{ik},
        # with Gamma^i_{ik} = d_k log sqrt(det chi)
        dinv = grad(inv)  # (..., i, j, k) = d_k chi^{ij}
        dlog = grad(0.5 * np.log(np.linalg.det(self.chi)))
        self.b = (dinv[..., 0, :, 0] + dinv[..., 1, :, 1]
                  + np.einsum("...kj,...k->...j", inv, dlog))

        def ck_norm(fld, order):
            total, cur = np.abs(fld).max(), fld
            for _ in range(order):
                cur = grad(cur)
                total += np.abs(cur).max()
            return float(total)

        self.size = (ck_norm(self.chi - eye, 2) + ck_norm(self.drift, 1)
                     + ck_norm(self.potential, 1))
        self.is_flat = (chi is None and drift is None and potential is None)

    def apply(self, u):
        """(L - Delta_{g0}) u on the grid."""
        if self.is_flat:
            return np.zeros_like(u)
        us = self.flat.D1 @ u
        uz = _dz(u)
        uss = self.flat.D2 @ u
        uzz = _dz(u, order=2)
        usz = _dz(us)
        second = (self.inv[..., 0, 0] * uss
                  + (self.inv[..., 0, 1] + self.inv[..., 1, 0]) * usz
                  + self.inv[..., 1, 1] * uzz) - (uss + uzz)
        first = ((self.b[..., 0] + self.drift[..., 0]) * us
                 + (self.b[..., 1] + self.drift[..., 1]) * uz)
        return second + first + self.potential * u


class CylinderSolution:
    """Solution v of L v = E with v = f - avg f + B on the inner circle."""

    def __init__(self, s, z, v, B, f_avg, n_op, iterations, contraction):
        self.s = s
        self.z = z
        self.v = v
        self.B = float(B)
        self.f_avg = float(f_avg)
        self.n_op = float(n_op)
        self.iterations = int(iterations)
        self.contraction = float(contraction)


def perturbation_size(l=10.0, n_s=400, n_z=64, chi=None, drift=None,
                      potential=None):
    """Measured C^2/C^1 size N(L) of the perturbation data on the grid."""
    s, _ = cylinder_grid(l, n_s, n_z)
    flat = _FlatOperator(s, n_z)
    return _Perturbation(flat, chi, drift, potential).size


def apply_operator(sol: CylinderSolution, chi=None, drift=None,
                   potential=None):
    """L v on the interior grid rows, for checking L v = E."""
    flat = _FlatOperator(sol.s, len(sol.z))
    pert = _Perturbation(flat, chi, drift, potential)
    return flat.laplacian(sol.v) + pert.apply(sol.v)


def cylinder_solve(f, E, l: float = 10.0, chi=None, drift=None,
                   potential=None, gamma: float = 0.5, n_max: float = 0.1,
                   tol: float = 1e-11, max_iter: int = 60
                   ) -> CylinderSolution:
    """Solve L v = E, v = f - avg f + B on {s=0}, v = 0 on {s=l}.

    f is sampled on the inner boundary circle (length n_z); E on the full
    (n_s+1, n_z) grid.  The constant B is produced by the iteration, not
    prescribed.  Contraction is monitored in the e^{gamma s}-weighted sup
    norm; a non-contracting perturbation raises PerturbationTooLargeError.
    """
    E = np.asarray(E, dtype=float)
    f = np.asarray(f, dtype=float)
    if E.ndim != 2 or len(f) != E.shape[1]:
        raise ValueError("E must be (n_s+1, n_z) and f must match n_z")
    n, n_z = E.shape
    s, z = cylinder_grid(l, n - 1, n_z)
    flat = _FlatOperator(s, n_z)
    pert = _Perturbation(flat, chi, drift, potential)
    if pert.size >= n_max:
        raise PerturbationTooLargeError(
            f"measured perturbation size {pert.size:.3g} >= {n_max}")

    weight = np.exp(gamma * s)[:, None]

    def wnorm(u):
        return np.abs(weight * u).max()

    f_modes = np.fft.rfft(f) / n_z
    f_avg = f_modes[0].real
    f_modes = f_modes.copy()
    f_modes[0] = 0.0

    def split_average(field):
        e0 = field.mean(axis=1)
        return field - e0[:, None], e0

    def flat_step(f_m, field):
        field0, e0 = split_average(field)
        U = flat.solve(f_m, field0)
        # average part: Delta u0 = e0 with u0(l) = u0'(l) = 0
        lu = flat._lu[0.0]
        rhs = e0.copy()
        rhs[0] = 0.0
        rhs[-1] = 0.0
        u0 = lu.solve(rhs)
        return U + u0[:, None], u0[0]

    v, B = flat_step(f_modes, E)
    if pert.is_flat:
        return CylinderSolution(s, z, v, B, f_avg, pert.size, 1, 0.0)

    zero_f = np.zeros_like(f_modes)
    term = v
    prev = wnorm(term)
    scale = max(wnorm(E), prev, 1e-300)
    sign = -1.0
    contraction = 0.0
    for it in range(2, max_iter + 2):
        resid = pert.apply(term)
        term, b_inc = flat_step(zero_f, resid)
        v = v + sign * term
        B = B + sign * b_inc
        cur = wnorm(term)
        contraction = cur / max(prev, 1e-300)
        if contraction >= 1.0:
            raise PerturbationTooLargeError(
                f"iteration growth factor {contraction:.3g} >= 1")
        if cur <= tol * scale:
            return CylinderSolution(s, z, v, B, f_avg, pert.size, it,
                                    contraction)
        prev = cur
        sign = -sign
    raise PerturbationTooLargeError(
        f"no convergence in {max_iter} iterations "
        f"(last contraction {contraction:.3g})")
