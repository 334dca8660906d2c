"""Color-partitioned blockdag toolkit.

A library and deterministic simulator for a proof-of-work blockdag mechanism
that assigns blocks random colors, scores each color's graph minor separately,
pays 0/1 rewards that penalize forking, and reads the ledger off a designated
color's canonical path. Includes an adversarial round scheduler, deviation
strategies, safe-history and ledger-desiderata checkers, and a calculator for
the concentration-bound parameter constraints.
"""

from .dag import (
    GENESIS_ID,
    AncestorViolation,
    Block,
    BlockDag,
    BlockId,
    DagError,
    DagView,
    UnknownBlock,
    UnknownParent,
    ancestor_closure,
)
from .minors import (
    CONTENT_DERIVED,
    SCHEDULER_RANDOM,
    VIRTUAL_SINK,
    VIRTUAL_SOURCE,
    ColorAssigner,
    MinorDag,
    build_minor,
    minor_depth,
)
from .rewards import (
    CanonicalPath,
    ColorEvaluation,
    InactiveMiner,
    NoColor,
    NotAcceptable,
    RewardReport,
    UtilityReport,
    canonical_path,
    is_acceptable,
    is_forked,
    reward,
    reward_all,
    utility,
)
from .ledgers import ExtendedLedger, Ledger, extended_ledger, ledger
from .sim import (
    DELIVERY_ADVERSARIAL_MAX,
    DELIVERY_FIXED,
    DELIVERY_UNIFORM,
    History,
    InvalidConfig,
    MinerConfig,
    Schedule,
    SchedulerConfig,
    Strategy,
    TurnContext,
    UnknownMiner,
    generate_schedule,
    run,
)
from .strategies import (
    Honest,
    OwnFruitOnly,
    PrivateChain,
    SelfForker,
    Withholder,
    make_strategy,
)
from .analysis import (
    DesiderataReport,
    DeviationResult,
    DeviationRow,
    SafetyVerdict,
    check_desiderata,
    check_safe,
    deviation_experiment,
    fork_participants,
    natural_forks,
    utility_closed_form,
)
from .params import (
    AlphaOutOfRange,
    ConstraintVerdict,
    InvalidTuple,
    NoSolution,
    ParamTuple,
    SuitabilityVerdict,
    ceil_inv_alpha,
    check_suitability,
    check_suitability_exact,
    delta_from_alpha,
    solve_min_nl,
)
from .serialize import (
    dag_from_jsonl,
    dag_to_jsonl,
    history_from_jsonl,
    history_to_jsonl,
    minor_to_jsonl,
)

__version__ = "0.1.0"
