"""Socio-temporal graph trajectory forecasting.

Thin package wrapper around the compiled ``_stgformer`` module: scripted
scene generation, window extraction, adjacency maps, training, prediction
and best-of-K metrics.
"""

try:
    from . import _stgformer as _core  # installed wheel layout
except ImportError:  # build-tree layout: module sits on PYTHONPATH
    import _stgformer as _core

OBSERVED_STEPS = _core.OBSERVED_STEPS
PREDICTED_STEPS = _core.PREDICTED_STEPS
WINDOW_STEPS = _core.WINDOW_STEPS
ConfigError = _core.ConfigError
Model = _core.Model
ParseError = _core.ParseError
Scene = _core.Scene
ShapeError = _core.ShapeError
TrajectoryWindow = _core.TrajectoryWindow
ade_fde = _core.ade_fde
hard_adjacency = _core.hard_adjacency
load_model = _core.load_model
load_scene = _core.load_scene
make_windows = _core.make_windows
soft_adjacency = _core.soft_adjacency
synth_scenario = _core.synth_scenario
train = _core.train
write_scene = _core.write_scene

__all__ = [
    "OBSERVED_STEPS",
    "PREDICTED_STEPS",
    "WINDOW_STEPS",
    "ConfigError",
    "Model",
    "ParseError",
    "Scene",
    "ShapeError",
    "TrajectoryWindow",
    "ade_fde",
    "hard_adjacency",
    "load_model",
    "load_scene",
    "make_windows",
    "soft_adjacency",
    "synth_scenario",
    "train",
    "write_scene",
]
