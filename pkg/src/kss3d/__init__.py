"""3D landmark shape estimation from 2D projections in Kendall shape space."""
from .asm import AsmOptions, AsmResult, asm_reconstruct
from .barycentric import BasisSet, inductive_mean, normalize_weights
from .camera import CameraPose, kendall_project, reprojection_error, weak_perspective_project
from .errors import (AllRestartsFailed, AntipodalShapes, DegenerateConfiguration,
                     DegenerateProjection, DegenerateTarget, InvalidBasis, KSSError,
                     NoConvergence, NonUniqueAlignment, PrefixSumDegenerate,
                     RankDeficientCoefficients, StalledStep, ZeroSum)
from .kendall import (align, frechet_mean, geodesic, shape_distance, spherical_distance,
                      to_preshape, well_position)
from .pipeline import ExperimentConfig, evaluate, gpa, kmeans_basis, make_test_projection
from .solver import ReconstructionProblem, ReconstructionResult, SolverOptions, reconstruct

__version__ = "0.1.0"
