"""Intersection numbers, tangency detection and transversality repairs."""

from .pairing import ExhaustionStep, exhaustion_estimate, lattice_crossings, pairing_exact, pairing_via_cup
from .records import TANGENCY_THRESHOLD, IntersectionRecord, intersection_points, subtorus_records
from .remark import RemarkCertificate, TrigPerturbation, remark_certificate
from .submanifold import PerturbationResult, intersect_submanifold, pairing_via_thom, perturb_to_transversality
from .tangency import NULL_TOLERANCE, AePairing, TangencySet, ae_pairing, detect_tangencies

__all__ = [
    "AePairing",
    "ExhaustionStep",
    "IntersectionRecord",
    "NULL_TOLERANCE",
    "PerturbationResult",
    "RemarkCertificate",
    "TANGENCY_THRESHOLD",
    "TangencySet",
    "TrigPerturbation",
    "ae_pairing",
    "detect_tangencies",
    "exhaustion_estimate",
    "intersect_submanifold",
    "intersection_points",
    "lattice_crossings",
    "pairing_exact",
    "pairing_via_cup",
    "pairing_via_thom",
    "perturb_to_transversality",
    "remark_certificate",
    "subtorus_records",
]
