"""Smooth transition functions shared by the Scherk fields and the assembler."""

import numpy as np


def cutoff_psi(a: float, b: float, s):
    """Monotone C^3 transition: 0 for s <= a, 1 for s >= b.

    The transition happens in the middle third of [a, b] (identically 0 on
    the a-side third and 1 on the b-side third), so derivatives vanish on a
    neighbourhood of both endpoints.  Reversing a > b gives the decreasing
    transition.
    """
    if a == b:
        raise ValueError("cutoff endpoints must differ")
    t = (np.asarray(s, dtype=float) - a) / (b - a)
    t = np.clip((t - 1.0 / 3.0) * 3.0, 0.0, 1.0)
    # 7th-order smoothstep (C^3 at the ends)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)
