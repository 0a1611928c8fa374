"""Quasi-periodic solutions of perturbed isochronous Hamiltonian systems by
alternating frequency updates and dimension-enlarged Newton steps."""

__version__ = "0.1.0"

from .hamiltonian import Monomial, PolynomialHamiltonian
from .solver import SolverConfig, SolverState, evaluate_solution, run

__all__ = ["Monomial", "PolynomialHamiltonian", "SolverConfig", "SolverState",
           "evaluate_solution", "run", "__version__"]
