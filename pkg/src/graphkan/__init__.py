"""GraphKAN: message-passing networks whose node update is a B-spline KAN layer."""

from .graph import BgConfig, Graph, gen_bg, normalize, read_graph, write_graph
from .kan import KanLayer, kan_backward, kan_forward
from .model import build_net, forward_pass
from .spline import SplineGrid, basis, basis_deriv
from .train import TrainConfig, run_experiment, train_trial

__version__ = "0.1.0"

__all__ = [
    "BgConfig", "Graph", "KanLayer", "SplineGrid", "TrainConfig", "basis", "basis_deriv", "build_net",
    "forward_pass", "gen_bg", "kan_backward", "kan_forward", "normalize", "read_graph", "run_experiment",
    "train_trial", "write_graph",
]
