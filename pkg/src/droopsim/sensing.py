"""Measurement channel models.

Every sampled quantity passes through an affine channel
``reading = true * scale + offset``.  The voltage-sensor offset is the
error this whole simulator exists to study; the other channels default
to ideal and are here so experiments can inject errors anywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SensorModel", "SensorSuite", "apply_sensor"]


@dataclass(frozen=True)
class SensorModel:
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (0.5 < self.scale < 1.5):
            raise ValueError(f"sensor scale {self.scale} outside (0.5, 1.5)")


def apply_sensor(true_value: float, model: SensorModel) -> float:
    """The reading a controller sees for a given true value."""
    return true_value * model.scale + model.offset


@dataclass(frozen=True)
class SensorSuite:
    """One inverter's four measurement channels."""

    v: SensorModel = field(default_factory=SensorModel)
    i_inv: SensorModel = field(default_factory=SensorModel)
    i_o: SensorModel = field(default_factory=SensorModel)
    v_dc: SensorModel = field(default_factory=SensorModel)

    def as_array(self) -> np.ndarray:
        """Flat (offset, scale) pairs in channel order, for the kernels."""
        return np.array([
            self.v.offset, self.v.scale,
            self.i_inv.offset, self.i_inv.scale,
            self.i_o.offset, self.i_o.scale,
            self.v_dc.offset, self.v_dc.scale,
        ])
