"""Dihedral symmetry groups of the assembled surfaces.

The group acting on a genus-g surface is generated by two orthogonal maps:
``omega`` (rotation about the y-axis by pi*tau followed by the reflection
y -> -y, tau = 1/(g+1)) and ``xi`` (reflection through the plane {z = 0}
rotated by pi*tau/2 about the y-axis).  omega has order 2(g+1), xi order 2,
and together they close into 4g+4 elements; omega^2 is the rotation by
2*pi*tau.

Every element is block diagonal with respect to the y-axis, so its action
on fields over an invariant surface carries the sign character
chi(beta) = beta[1,1] (how beta moves the unit normal relative to the
surface: -1 exactly for the elements that swap the two sides of the plane
{y = 0}).  :meth:`SymmetryGroup.equivariant_project` averages with that
character and propagates orbit values so the result is equivariant bitwise,
not merely to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "SymmetryMatchError",
    "rotation_about_y",
    "omega_matrix",
    "xi_matrix",
    "SymmetryGroup",
]


class SymmetryMatchError(ValueError):
    """A symmetry image of the vertex set failed to land on the vertex set."""


def rotation_about_y(angle):
    """Rotation taking (cos a, 0, sin a) to (cos(a + angle), 0, sin(a + angle))."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


_REFLECT_Y = np.diag([1.0, -1.0, 1.0])
_REFLECT_Z = np.diag([1.0, 1.0, -1.0])


def omega_matrix(tau):
    """Rotation about y by pi*tau followed by the reflection y -> -y."""
    return _REFLECT_Y @ rotation_about_y(np.pi * tau)


def xi_matrix(tau):
    """Reflection through the plane {z = 0} rotated by pi*tau/2 about y."""
    r = rotation_about_y(np.pi * tau / 2.0)
    return r @ _REFLECT_Z @ r.T


@dataclass(frozen=True)
class SymmetryGroup:
    """Closed list of orthogonal matrices with the derived characters.

    ``elements[0]`` is the identity; ``character`` is the normal-sign
    character (exactly +-1, the y-y entry of each block-diagonal element)
    and ``orientation`` the determinant sign.
    """

    tau: float
    elements: np.ndarray

    @classmethod
    def dihedral(cls, genus: int) -> "SymmetryGroup":
        """The symmetry group of the genus-g assembled surface, 4g+4 elements."""
        if genus < 1:
            raise ValueError("genus must be at least 1")
        tau = 1.0 / (genus + 1)
        gens = [omega_matrix(tau), xi_matrix(tau)]
        elems = [np.eye(3)]
        queue = [elems[0]]
        while queue:
            m = queue.pop()
            for g in gens:
                p = g @ m
                gaps = np.abs(np.asarray(elems) - p).max(axis=(1, 2))
                if gaps.min() > 1e-9:
                    elems.append(p)
                    queue.append(p)
        if len(elems) != 4 * genus + 4:
            raise RuntimeError(
                f"group closure found {len(elems)} elements, "
                f"expected {4 * genus + 4}")
        return cls(tau, np.array(elems))

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def omega(self):
        return omega_matrix(self.tau)

    @property
    def xi(self):
        return xi_matrix(self.tau)

    @property
    def sigma(self):
        """The rotation by 2*pi*tau (= omega squared)."""
        return rotation_about_y(2.0 * np.pi * self.tau)

    @property
    def character(self):
        # block-diagonal structure makes the y-y entry an exact sign
        return self.elements[:, 1, 1].copy()

    @property
    def orientation(self):
        return np.sign(np.linalg.det(self.elements))

    # -- action on meshed surfaces ------------------------------------------

    def vertex_permutations(self, vertices, tol: float = 1e-9):
        """Index permutations realizing each element on an invariant vertex set.

        ``perms[b, i]`` is the vertex nearest elements[b] @ vertices[i]; if
        any image misses the set by more than ``tol``, or the matching is
        not a bijection, raises :class:`SymmetryMatchError`.
        """
        vertices = np.asarray(vertices, dtype=float)
        n = len(vertices)
        tree = cKDTree(vertices)
        perms = np.empty((self.order, n), dtype=np.int64)
        for b, m in enumerate(self.elements):
            dist, idx = tree.query(vertices @ m.T)
            if dist.max() > tol:
                raise SymmetryMatchError(
                    f"element {b}: worst vertex gap {dist.max():.3e} "
                    f"exceeds {tol:.1e}")
            if len(np.unique(idx)) != n:
                raise SymmetryMatchError(
                    f"element {b}: vertex matching is not a bijection")
            perms[b] = idx
        return perms

    def orbit_ids(self, perms):
        """Contiguous orbit labels; vertices share a label iff related by
        a group element."""
        reps = perms.min(axis=0)
        return np.unique(reps, return_inverse=True)[1]

    def equivariant_project(self, values, perms):
        """Project a scalar field onto the equivariant class.

        The signed orbit average is computed once per orbit representative
        and copied to the other members with the exact +-1 character, so
        the projected field satisfies chi(beta) * f[perms[beta]] == f
        bitwise.  Orbits pinned by a sign-reversing stabilizer are zeroed
        (the only equivariant value there).
        """
        values = np.asarray(values, dtype=float)
        n = perms.shape[1]
        chi = self.character
        signed = chi[:, None] * values[perms]
        avg = signed.mean(axis=0)
        fixed = perms == np.arange(n)[None, :]
        bad = (fixed & (chi[:, None] < 0)).any(axis=0)
        avg[bad[perms].any(axis=0)] = 0.0
        reps = np.unique(perms.min(axis=0))
        out = np.empty(n, dtype=float)
        for b in range(self.order):
            out[perms[b, reps]] = chi[b] * avg[reps]
        return out

    def symmetrize_vertices(self, vertices, perms):
        """Average beta^{-1}(image vertex) over the group.

        Leaves an already-invariant set fixed and makes a nearly invariant
        one invariant up to the roundoff of the matrix action.
        """
        vertices = np.asarray(vertices, dtype=float)
        acc = np.zeros_like(vertices)
        for b, m in enumerate(self.elements):
            # row-vector form of m^{-1} x = m^T x
            acc += vertices[perms[b]] @ m
        return acc / self.order
