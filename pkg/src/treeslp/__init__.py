"""Ranked trees stored as straight-line grammars over their preorder traversal."""

from .errors import *  # noqa: F401,F403
from .errors import TreeSlpError
from .evaluation import (
    BOOLEAN,
    HEIGHT,
    MAX_PLUS,
    STRAHLER,
    Interpretation,
    caterpillar_matrix_max_plus,
    caterpillar_matrix_plus_times,
    eval_bool,
    eval_brute,
    eval_lattice,
    eval_max_plus,
    eval_pairs,
    eval_plus_times_mod,
    height,
    lattice_interp,
    node_depth,
    plus_times_interp,
    reduce_to_caterpillar,
    strahler,
)
from .generators import bp_brute, comb_slp, compress, doubling_slp, phi_gap_tree_slp
from .navigation import BpSlp, DfudsIndex, dfuds_grammar, dfuds_slp
from .shapes import TreeShape, compute_shapes, gaps, is_tree, shape_combine, shape_of_word
from .slp import (
    CompositionSystem,
    GrammarBuilder,
    RankedAlphabet,
    Slp,
    Symbol,
    Transducer,
    apply_transducer,
    expand,
    normalize_cnf,
    substring_slp,
)
from .textformat import dump_slp, dump_tslp, parse_slp, parse_tree_text, parse_tslp
from .trees import ExplicitTree, Parameter, parse_pattern, parse_term, term_string
from .tslp import Tslp, TslpRule, slp_to_tslp, tslp_expand, tslp_to_slp, validate_tslp

__version__ = "0.1.0"
