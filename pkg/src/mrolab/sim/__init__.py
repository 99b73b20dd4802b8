from .layout import A3Config, Cell, CellLayout, grid_layout, hex_layout, make_layout
from .scenario import ScenarioConfig, SimParams
from .world import World, run_window

__all__ = [
    "A3Config",
    "Cell",
    "CellLayout",
    "grid_layout",
    "hex_layout",
    "make_layout",
    "ScenarioConfig",
    "SimParams",
    "World",
    "run_window",
]
