"""Cost-aware multi-objective design exploration for noisy ReRAM crossbars.

The package couples a stochastic crossbar simulator and a noise-aware MLP
trainer to an information-theoretic multi-objective optimizer that selects
(design, fidelity) pairs by entropy gain per unit evaluation cost.
"""

from .config import CampaignConfig, ConfigError, emit_defaults, load_config, parse_config
from .crossbar import (
    MappedLayer,
    NoiseSpec,
    QuantizedMatrix,
    layer_from_json,
    layer_to_json,
    map_weights,
    mvm,
    program,
    quantize,
)
from .design_space import (
    DEFAULT_SPACE,
    DesignSpace,
    ReramDesign,
    decode,
    encode,
    fidelity_grid,
    sample_designs,
    space_cardinality,
)
from .gp import CfGpModel, GpConfig, GpParams, SampledFunction, fit, posterior, sample_function
from .mesmo import (
    Budget,
    CampaignResult,
    MesmoConfig,
    ParetoFrontSample,
    acquisition,
    entropy_term,
    run_cf_mesmo,
    run_mesmo,
    run_random,
    sample_pareto_fronts,
    select_next,
)
from .noise import (
    NoiseContext,
    RtnParams,
    prog_sigma,
    rtn_sample,
    sample_read_noise,
    sample_write_noise,
    shot_sigma,
    thermal_sigma,
)
from .objectives import (
    HwCostParams,
    MooProblem,
    NetworkSpec,
    hw_area,
    hw_energy,
    hw_latency,
    reram_problem,
    synthetic_cf_problem,
)
from .pareto import (
    FrontSet,
    Nsga2Config,
    dominated_hypervolume,
    dominates,
    hypervolume,
    non_dominated_sort,
    nsga2,
)
from .resna import (
    Dataset,
    DatasetSpec,
    MlpSpec,
    TrainingDivergedError,
    TrainState,
    accuracy_objective,
    infer,
    majority_vote,
    make_dataset,
    train,
)

__version__ = "0.1.0"
