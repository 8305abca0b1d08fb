"""Molecular unfolding: MOL2 ligands to torsion grids, HUBO/QUBO encodings and classical search."""

from .bench import (
    build_report,
    best_so_far_curve,
    degradation_study,
    gain_per_tts_slopes,
    normalized_gain,
    tts,
    vdw_validity,
)
from .encoder import (
    AngleGrid,
    HuboProblem,
    Infeasible,
    VariableMap,
    a_const_base,
    build_hubo,
    decode,
    encode,
    one_hot_penalty,
    optimization_polynomial,
    trig_poly,
)
from .estimators import HuboEncoder, MolecularUnfolder, Quadratizer, TorsionModeler
from .geometry import (
    apply_torsions,
    compose,
    objective_fragment,
    objective_full,
    torsion_transform,
    unfold_source,
)
from .mol2 import Atom, Bond, BondKind, Molecule, parse_mol2, read_mol2, write_mol2
from .polynomial import BinaryPolynomial, evaluate
from .quadratizer import QuboProblem, chop_qubo, lift_assignment, quadratize
from .solvers import (
    SaConfig,
    SolverRun,
    exhaustive,
    geodock_greedy,
    random_search,
    simulated_annealing,
)
from .topology import (
    Fragment,
    Torsion,
    TorsionModel,
    betweenness_centrality,
    build_torsion_model,
    find_rotatable_bonds,
    pair_eligibility,
    prune_terminal_hydrogens,
)

__version__ = "0.1.0"
