from .boundary import BoundaryAttackConfig, ba_orthogonal_step, ba_source_step, run_boundary_attack
from .common import (AttackTrace, Geometry, Problem, Targeted, TraceRecord, Untargeted,
                     boundary_distance, init_untargeted)
from .signopt import SignOptConfig, estimate_sign_gradient, line_search_step, run_signopt
