"""Uniform Cartesian space-time meshes organised in timeslabs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfr.errors import ConfigurationError
from stfr.operators import ElementGeometry

BOUNDARY_T0 = "t=0"
BOUNDARY_TT = "t=T"


@dataclass(frozen=True)
class SpaceTimeMesh:
    """``Ks x Kt`` elements on ``[x_L, x_R] x [t_0, T]``; periodic in x.

    Elements are indexed ``(ks, kt)`` with ``ks`` in ``0..Ks-1`` along x and
    ``kt`` in ``0..Kt-1`` along t (1-based labels are
    ``ks + 1`` and ``kt + 1``).  Fields are stored as arrays of shape
    ``(Kt, Ks, n_states, N_soln)``.
    """

    Ks: int
    Kt: int
    x_range: tuple[float, float] = (0.0, 2.0)
    t_range: tuple[float, float] = (0.0, 2.0)

    def __post_init__(self):
        if self.Ks < 1 or self.Kt < 1:
            raise ConfigurationError("element counts must be >= 1")
        if not self.x_range[1] > self.x_range[0]:
            raise ConfigurationError(f"degenerate spatial range {self.x_range}")
        if not self.t_range[1] > self.t_range[0]:
            raise ConfigurationError(f"degenerate temporal range {self.t_range}")

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.Ks

    @property
    def dt(self) -> float:
        return (self.t_range[1] - self.t_range[0]) / self.Kt

    @property
    def geometry(self) -> ElementGeometry:
        return ElementGeometry(self.dx, self.dt)

    @property
    def n_elements(self) -> int:
        return self.Ks * self.Kt

    def x_left(self) -> np.ndarray:
        return self.x_range[0] + self.dx * np.arange(self.Ks)

    def t_bottom(self) -> np.ndarray:
        return self.t_range[0] + self.dt * np.arange(self.Kt)

    def physical_x(self, xi) -> np.ndarray:
        """Physical x of reference coordinates ``xi`` for every column: ``(Ks, len(xi))``."""
        xi = np.asarray(xi, dtype=float)
        return self.x_left()[:, None] + 0.5 * self.dx * (xi[None, :] + 1.0)

    def physical_t(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return self.t_bottom()[:, None] + 0.5 * self.dt * (tau[None, :] + 1.0)

    def neighbor(self, ks: int, kt: int, face: int):
        """Neighbour across ``face`` (1..4): an ``(ks, kt)`` tuple or a boundary marker."""
        if face == 1:
            return ((ks - 1) % self.Ks, kt)
        if face == 2:
            return ((ks + 1) % self.Ks, kt)
        if face == 3:
            return (ks, kt - 1) if kt > 0 else BOUNDARY_T0
        if face == 4:
            return (ks, kt + 1) if kt < self.Kt - 1 else BOUNDARY_TT
        raise ConfigurationError(f"face must be 1..4, got {face}")

    def timeslab(self, kt: int):
        """Element indices of timeslab ``kt`` in x order."""
        return [(ks, kt) for ks in range(self.Ks)]

    def timeslabs(self):
        for kt in range(self.Kt):
            yield kt, self.timeslab(kt)


def build_mesh(Ks, Kt, x_range=(0.0, 2.0), t_range=(0.0, 2.0)) -> SpaceTimeMesh:
    return SpaceTimeMesh(int(Ks), int(Kt), tuple(map(float, x_range)), tuple(map(float, t_range)))
