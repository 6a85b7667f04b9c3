"""String diagrams with discarding, their finstoch and quantum semantics,
and checks relating terminality to non-signalling."""
from .behaviors import (
    Behavior,
    behavior_from_v_shape,
    behavior_nonsignalling,
    isotropic,
    lhv_feasible,
    lhv_threshold,
    named_behavior,
    parse_behavior,
    pr_box,
    uniform,
)
from .causal import (
    CausalProcessNetwork,
    CausalStructure,
    DiamondNetwork,
    NetWire,
    can_signal,
    coarse_grain,
    coarse_grain_network,
    diamond_normal_form,
    diamond_structure,
    flatten,
    network_to_diagram,
    validate_structure,
)
from .checkers import (
    Split,
    check_bang,
    check_nonsignalling,
    check_terminal_process,
    check_terminal_theory,
    check_weak_nonsignalling,
    theorem1_witness,
    theorem2_audit,
    unique_effect_check,
)
from .diagram import (
    BoxSignature,
    Diagram,
    Signature,
    SystemLabel,
    box,
    discard,
    identity,
    par,
    permutation,
    seq,
    swap,
    well_formed,
)
from .dsl import ParseError, format_diagram, parse, parse_diagram, to_text
from .semantics import FINSTOCH, QUANTUM, Interpretation, QuantumChannel, evaluate, validate

__version__ = "0.1.0"
