"""Small numpy network engine: dense and GRU layers, Adam, Polyak targets, gradient checks."""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .network import (
    Trace,
    backward,
    dense_forward,
    forward,
    gru_step,
    has_recurrence,
    initial_hidden,
)
from .optim import OptimState, adam_update, polyak_update
from .params import (
    LayerSpec,
    NetworkParams,
    Topology,
    dense,
    gru,
    init_params,
    load_params,
    mlp_topology,
    parameter_count,
    params_from_bytes,
    params_to_bytes,
    recurrent_topology,
    save_params,
)

__all__ = [
    "GradCheckReport", "LayerSpec", "NetworkParams", "OptimState", "Topology", "Trace",
    "adam_update", "backward", "dense", "dense_forward", "forward", "grad_check", "gru",
    "gru_step", "has_recurrence", "init_params", "initial_hidden", "load_params",
    "mlp_topology", "parameter_count", "params_from_bytes", "params_to_bytes",
    "polyak_update", "recurrent_topology", "relative_error", "save_params",
]
