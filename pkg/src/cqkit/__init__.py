"""Static analysis of conjunctive queries under tgds and egds.

The toolkit chases, classifies, decides containment and semantic
acyclicity, computes acyclic approximations, and evaluates queries with
the naive join, the Yannakakis semijoin program, or the one-cover game.
"""

from .model import (
    CQ,
    UCQ,
    Atom,
    Const,
    DependencySet,
    Egd,
    Frozen,
    Instance,
    Null,
    Tgd,
    Var,
    canonical_database,
    gaifman_components,
    is_body_connected,
)
from .parser import Program, parse_program, serialize
from .acyclicity import JoinTree, compact_witness, is_acyclic, validate_join_tree
from .classify import ClassLabels, Marking, classify, sticky_marking
from .chase import (
    ChasePolicy,
    ChaseResult,
    chase,
    chase_query,
    guarded_chase_forest,
    satisfies,
)
from .containment import (
    NO,
    YES,
    RewriteSet,
    TriState,
    contains_chase,
    contains_rewrite,
    core,
    equivalent,
    find_homomorphism,
    ucq_rewrite,
)
from .decider import (
    SemAcAnswer,
    SemAcOptions,
    SizeBound,
    acyclic_approximations,
    conjunction_reduction,
    connect,
    decide_semacyc,
    decide_semacyc_ucq,
    enumerate_acyclic_candidates,
    size_bound,
)
from .evaluate import (
    GameStrategy,
    eval_naive,
    eval_yannakakis,
    game_equiv,
    semac_eval,
)

__version__ = "0.1.0"
