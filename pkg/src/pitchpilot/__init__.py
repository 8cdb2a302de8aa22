"""Pitch-attitude autopilot simulation with fuzzy self-tuning PID control."""

from .controllers import ControllerSpec, FuzzySelfTuningPID, PIDController, PidGains, ProportionalController
from .fuzzy import FuzzyInferenceSystem, default_system, load_default_system
from .lti import PLANTS, StateSpaceModel, TransferFunction, to_state_space
from .metrics import StepMetrics, analyze_response, compare
from .scenario import Scenario, load_scenario
from .simloop import LoopConfig, SimulationTrace, run

__version__ = "0.1.0"
