"""Thermodynamic-formalism numerics for finitely generated rational semigroups.

Submodules:
    rational  - rational-map arithmetic on the Riemann sphere
    julia     - Julia-set point clouds and separation/expansion checks
    thermo    - preimage-tree leaf tables, pressure, free energy t(beta)
    spectrum  - Legendre transform, multifractal/Lyapunov spectra, rigidity
    randdyn   - limit-state fields, Hoelder exponents, alpha_minus bound
    cli       - configuration-driven command-line pipeline
"""

from .rational import (
    INF,
    MultiMap,
    Polynomial,
    RationalMap,
    SpherePoint,
    chordal_distance,
    rmap_compose,
    rmap_derivative_norm,
    rmap_eval,
    rmap_from_json,
    rmap_preimages,
    rmap_to_json,
)
from .julia import (
    build_julia_cloud,
    check_expansion,
    check_separation,
    repelling_fixed_point,
)
from .thermo import (
    HolderFamily,
    auto_depth,
    build_leaf_tables,
    free_energy,
    free_energy_table,
    gamma_root,
    pressure_estimate,
)
from .spectrum import (
    legendre_direct,
    lyapunov_spectrum,
    rigidity_test,
    spectrum_parametric,
)
from .randdyn import (
    TrapRegion,
    alpha_minus_bound,
    coliseum_fixed_point,
    coliseum_monte_carlo,
    holder_exponent,
    holder_survey,
)

__version__ = "0.1.0"
