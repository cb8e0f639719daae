"""Curie-Weiss model of an ideal quantum measurement.

Modules: ``qm`` (spin density matrices, ensemble merging), ``thermo``
(mean-field free energy of the magnet), ``dephasing`` (truncation of the
off-diagonal elements), ``registration`` (pointer dynamics and Born
sampling), ``oracle`` (small-N brute-force checks) and ``cli``.
"""

__version__ = "0.1.0"

from .qm import EnsembleWeights, SpinDensityMatrix, merge_frequencies, mix, pure_state, validate
from .thermo import (
    FreeEnergyCurve,
    ModelParams,
    critical_coupling,
    export_curve,
    ferromagnetic_magnetization,
    free_energy_per_spin,
    stationary_points,
)
