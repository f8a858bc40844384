"""Measured solenoids in tori: currents, homology classes and intersections."""

from .cantor import CantorTransversal, ReturnMap, build_cantor, build_return_map
from .currents import (
    HomologyClass,
    QuadratureSpec,
    evaluate_current,
    homotopy_drift,
    poincare_dual_pairing,
    rs_class,
    stokes_residual,
)
from .errors import (
    AddressError,
    ConstructionError,
    ContractRefusal,
    DegreeError,
    ImmersionError,
    ParameterError,
    PerturbationFailure,
    SolenoidError,
    TangencyError,
)
from .forms import DifferentialForm, Subtorus, ThomForm, TrigPoly, constant_form, thom_form
from .models import (
    CantorSuspension,
    GraphSolenoid,
    LinearTorusFoliation,
    Perturbation,
    PerturbedModel,
    Profile,
    ZeroSolenoid,
    horizontal_circles,
    kronecker,
    vertical_circle,
)

__all__ = [name for name in dir() if not name.startswith("_")]
