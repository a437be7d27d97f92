from .metrics import flow_fidelity, mask_iou
from .probe import leak_max, leak_probe
from .scenario import MotionSpec, Scenario, ScenarioError, generate_scenario
from .simulate import report_json, scenario_from_config, simulate

__all__ = [
    "MotionSpec", "Scenario", "ScenarioError", "flow_fidelity", "generate_scenario",
    "leak_max", "leak_probe", "mask_iou", "report_json", "scenario_from_config", "simulate",
]
