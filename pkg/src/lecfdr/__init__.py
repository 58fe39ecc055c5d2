"""FDR-controlled acceptance thresholds for selective prediction and model cascades."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BELOW_MIN,
    GateOutcome,
    MultiRecord,
    Record,
    RiskSpec,
    ThresholdDecision,
    ValidationError,
    sort_by_uncertainty,
    validate_multi,
    validate_records,
)
from .single import calibrate_single, check_constraint, gate_single, min_feasible_alpha, prefix_margins  # noqa: E402
from .routing import (  # noqa: E402
    calibrate_multi,
    calibrate_routing,
    check_routing_constraint,
    gate_cascade,
    grid_scan_routing,
    system_indicators,
)
from .coin import calibrate_coin, clopper_pearson_ucb, hoeffding_ucb, reg_incomplete_beta, UcbQuery  # noqa: E402
from .kernels import BACKEND  # noqa: E402
