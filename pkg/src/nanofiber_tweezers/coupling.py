"""Atom-waveguide coupling efficiency beta(d).

The guided emission rate follows the mode intensity at the atom,
``Gamma_g(d) = kappa_c * Gamma0 * I(d)``, and radiation into free space is
taken at its vacuum value ``Gamma0``. ``kappa_c`` is fixed by a single anchor
point; by default beta(671 nm) = 0.006 for the second lattice site.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import AtomSpec
from .fibermode import FiberSpec, GuidedMode, evanescent_intensity, solve_he11

DEFAULT_ANCHOR = (671e-9, 0.006)
FIBER_DIAMETER = 310e-9


@dataclass(frozen=True)
class CouplingModel:
    mode: GuidedMode
    gamma0: float
    calibration: float = 1.0

    def __post_init__(self):
        if not self.calibration > 0:
            raise ValueError("calibration prefactor must be > 0")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be > 0")

    def guided_rate(self, d):
        return self.calibration * self.gamma0 * evanescent_intensity(self.mode, d)

    def total_rate(self, d):
        return self.guided_rate(d) + self.gamma0


def beta_at(model: CouplingModel, d):
    g = model.calibration * np.asarray(evanescent_intensity(model.mode, d))
    out = g / (g + 1.0)
    return float(out) if out.ndim == 0 else out


def calibrate(model: CouplingModel, anchor_d: float = DEFAULT_ANCHOR[0],
              anchor_beta: float = DEFAULT_ANCHOR[1]) -> CouplingModel:
    if not 0.0 < anchor_beta < 1.0:
        raise ValueError(f"anchor beta {anchor_beta} unreachable: need 0 < beta < 1")
    intensity = evanescent_intensity(model.mode, anchor_d)
    if not intensity > 0:
        raise ValueError(f"mode intensity vanishes at {anchor_d} m; anchor unreachable")
    kappa = anchor_beta / (1.0 - anchor_beta) / intensity
    return replace(model, calibration=kappa)


def default_model(diameter: float = FIBER_DIAMETER, atom: AtomSpec | None = None,
                  anchor=DEFAULT_ANCHOR, index_core: float | None = None) -> CouplingModel:
    atom = AtomSpec.cesium_d2() if atom is None else atom
    mode = solve_he11(FiberSpec.from_diameter(diameter, atom.wavelength_probe, index_core=index_core))
    return calibrate(CouplingModel(mode=mode, gamma0=atom.Gamma_natural), *anchor)


def beta_curve(model: CouplingModel, d_max: float = 2e-6, points: int = 401):
    d = np.linspace(0.0, d_max, points)
    return d, beta_at(model, d)
