"""Analytic optimal squeezing of a wave packet trapped in an infinite square well.

The package is organised bottom-up:

* :mod:`wellsqueeze.welltrap`    eigenbasis, couplings, resonances
* :mod:`wellsqueeze.targetgen`   squeezed target packet and its coefficients
* :mod:`wellsqueeze.control`     closed-form control synthesis and bookkeeping
* :mod:`wellsqueeze.dynamics`    full / RWA / reduced / analytic propagation
* :mod:`wellsqueeze.diagnostics` widths, fidelities, model comparison
* :mod:`wellsqueeze.runner`      scenario configs, output files, figures
"""

from .welltrap import (
    WellSpec,
    CouplingMatrix,
    ResonanceTable,
    LinearProfile,
    SinusoidalProfile,
    CustomProfile,
    eigenenergy,
    eigenfunction,
    transition_frequency,
    coupling_element_linear,
    coupling_element_general,
    coupling_matrix,
    build_resonance_table,
)
from .targetgen import (
    TargetSpec,
    SpectralVector,
    target_wavefunction,
    target_coefficients,
    choose_truncation,
)
from .control import (
    ControlSchedule,
    synthesize,
    field_value,
    total_energy,
    duration_from_energy,
    check_boundary_condition,
    cost_functional,
    adiabaticity_check,
    estimate_si_duration,
)
from .dynamics import (
    TrajectoryRecord,
    GridWavefunction,
    ground_state,
    propagate_full,
    propagate_rwa,
    propagate_reduced,
    analytic_amplitudes,
    magnus_first_order,
    reconstruct_wavefunction,
)
from .diagnostics import (
    dispersion,
    fidelity,
    compare_models,
    monotonicity_report,
    validity_window,
)

__version__ = "0.1.0"
