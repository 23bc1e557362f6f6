"""Planning with k-step subgoals: planners, environments, providers, harness.

The core loop is environment-agnostic: a generator proposes states about k
steps ahead, a value function orders the frontier, and a low-level policy
(or an exact path finder) connects proposals with primitive actions. See
the envs subpackage for the three bundled environments and `providers` for
oracle/tabular/bridge provider bundles.
"""

from .datasets import DatasetRecord, group_trajectories, read_dataset, write_dataset
from .mcts import MctsConfig, TreeEdge, mcts_solve
from .providers import (
    TabularModel,
    fit_tabular,
    make_tabular_bundle,
    oracle_bundle,
    with_corrupted_generator,
    with_noisy_value,
)
from .search import (
    bf_ksubs_solve,
    chain_sampler_solve,
    get_path_learned,
    graph_size,
    prune_by_total_probability,
)
from .seeds import derive_seed
from .types import (
    CountingPolicy,
    Environment,
    ProviderBundle,
    SearchConfig,
    SearchMetrics,
    SearchResult,
    SearchStatus,
    SubgoalProposal,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CountingPolicy",
    "DatasetRecord",
    "Environment",
    "MctsConfig",
    "ProviderBundle",
    "SearchConfig",
    "SearchMetrics",
    "SearchResult",
    "SearchStatus",
    "SubgoalProposal",
    "TabularModel",
    "TreeEdge",
    "bf_ksubs_solve",
    "chain_sampler_solve",
    "derive_seed",
    "fit_tabular",
    "get_path_learned",
    "graph_size",
    "group_trajectories",
    "make_tabular_bundle",
    "mcts_solve",
    "oracle_bundle",
    "prune_by_total_probability",
    "read_dataset",
    "with_corrupted_generator",
    "with_noisy_value",
    "write_dataset",
]
