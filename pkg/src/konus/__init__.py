"""Cost-of-living index numbers for economies with time-varying preferences."""

from .basket import (
    CostOfLivingCurve,
    MinimalBasketRecord,
    basket_by_cost,
    basket_record_by_cost,
    cost_of_living,
    m_map_eval,
    minimal_basket,
    minimal_basket_closed_form,
    minimal_basket_numeric,
    minimal_section,
)
from .core import (
    BlackBox,
    CobbDouglas,
    CrossSection,
    GaugeMap,
    PriceFunctional,
    UtilityFunction,
    apply_gauge,
    as_basket,
    eval_utility,
    infer_gauge,
    level_point,
    reparameterize_section,
    validate_convex_to_origin,
    validate_cross_section,
)
from .errors import (
    FlowEscape,
    IndexConsistencyError,
    KonusError,
    LevelSetError,
    NonConvergence,
    NonMonotone,
    NotSameFoliation,
    TimeMismatch,
)
from .index import IndexSeries, Scenario, cola_index, index_series, naive_welfare, welfare
from .transport import (
    Connection1D,
    CostAdjustment,
    CostGenerator,
    TangentPerturbation,
    compose_adjustments,
    flow_adjustment,
    generator_from_adjustments,
    horizontality_check,
    invert_adjustment,
    naive_adjustment,
    scaling_adjustment,
    tabulated_adjustment,
    transport_1d,
)

__version__ = "0.1.0"
