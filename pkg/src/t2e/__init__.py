"""T2E: a deterministic 2D multi-robot target-trapping simulation engine.

Captor robots try to shrink the target robot's absolutely safe zone (the
region it can reach strictly sooner than any captor, computed by a
fast-marching solver) to nothing, moving under force-based dynamics among
occupancy-grid obstacles.  The package ships the simulation library, a batch
CLI, a JSON line policy-bridge protocol, and reproducible sample maps.
"""

from .agents import (HeuristicConfig, HeuristicEvader, HeuristicPursuer,
                     Policy, RandomPolicy, ScriptedPolicy, StationaryPolicy,
                     resolve_policy)
from .dynamics import (Action, RobotSpec, RobotState, Team, captor_spec,
                       step_robot, step_robot_full, target_spec)
from .eikonal import ArrivalField, ASZReport, compute_asz, soa_series, solve_arrival
from .engine import (EpisodeConfig, MetricsReport, SpawnConfig, StepRecord,
                     TrajectoryLog, WorldState, compute_metrics, run_episode,
                     spawn, step)
from .gridmap import (MapLevel, OccupancyGrid, classify_level, clearance,
                      find_map, load_map, parse_map, raycast, save_map,
                      traversable_area)
from .perception import (AgentObservation, ObservationConfig,
                         ObstacleObservation, observe)
from .rewards import (CaptureMethod, RewardBreakdown, RewardConfig,
                      RewardMode, capture_check)

__version__ = "0.1.0"
