"""Flows and maps of the example systems."""
from .flows import (
    LOG_LAMBDA,
    STABLE_DIR,
    UNSTABLE_DIR,
    CatSuspension,
    FamilyR,
    Flow,
    IdentityFlow,
    NumericField,
    ProductSuspensionIdentity,
    Profile,
    TimeReversed,
    TimeScaled,
    cat_matrix_power,
    flow,
    reverse,
    tangent_pushforward,
)
from .hamiltonian import (
    CriticalPoint,
    HamiltonianAnnulus,
    HomoclinicReport,
    bump3,
    find_critical_points,
    g0,
    homoclinic_loop,
)
from .integrate import IntegrationError, finite_difference_jacobian, integrate_rk4, integrate_variational_rk4
from .maps import (
    CatMap,
    DoublingCircle,
    IdentityMap,
    Map,
    ProductMap,
    TimeOne,
    apply_map,
    cat_apply,
    cat_derivative,
    orbit,
)
