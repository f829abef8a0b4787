"""Feature selection by quadratic programming over mutual information, with
k-means over features to shrink the programs that need solving."""

__version__ = "0.1.0"

from .dataset import Dataset, DiscretizedDataset, SplitPlan, discretize, load_csv, load_sparse, make_splits, normalize
from .errors import ConfigError, ConvergenceError, DataError, NumericalError, RedcutError
from .infotheory import SimilarityModel, build_similarity, entropy, joint_entropy, mi_distance, mutual_information
from .qp import SimplexSolution, rank_by_alpha, solve_simplex_qp, solve_theta_qp
from .selectors import FeatureSpace, IrrParams, SelectionResult, ikm_qpfs, ikma_qpfs, qpfs, tlkm_qpfs, top_k
