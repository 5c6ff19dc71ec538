"""Plasmonic resonance and anomalous localized resonance on nested curves.

Modules
-------
geometry
    Smooth closed curves, discretization and point location.
potentials
    Nystrom layer-potential operators and off-boundary evaluation.
npsystem
    Block operators, symmetrization, perturbed solves and shell energies.
sources
    Source variants, Newtonian potentials and boundary data.
annulus
    Closed-form mode sums for the concentric annulus and the growth classifier.
app
    Command-line driver.
"""
from .annulus import AnnulusConfig, CalrClassifier, classify
from .geometry import Circle, Ellipse, PerturbedCircle, ProblemGeometry, make_curve
from .npsystem import NPSymmetrizer, assemble_block_operators, build_symmetrization, solve_perturbed
from .sources import ChargeCollection, CoeffSequence, Dipole, FourierCoeffs, Quadrupole, ShellBump
from .verdict import CalrVerdict, Verdict

__all__ = [
    "AnnulusConfig",
    "CalrClassifier",
    "CalrVerdict",
    "ChargeCollection",
    "Circle",
    "CoeffSequence",
    "Dipole",
    "Ellipse",
    "FourierCoeffs",
    "NPSymmetrizer",
    "PerturbedCircle",
    "ProblemGeometry",
    "Quadrupole",
    "ShellBump",
    "Verdict",
    "assemble_block_operators",
    "build_symmetrization",
    "classify",
    "make_curve",
    "solve_perturbed",
]
