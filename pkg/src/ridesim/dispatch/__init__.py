"""Learned relocation of idle vehicles."""
from .agent import AgentConfig, QFunction, ReplayBuffer, greedy_values, schedule, select_action
from .network import build_model
from .policy import DEFAULT_IDLE_THRESHOLD, DispatchDecision, dispatch_idle, needs_dispatch
from .reward import DEFAULT_BETAS, RewardBreakdown, compute_reward
from .state import (ACTION_SIDE, MAX_MOVE, N_ACTIONS, STAY, DispatchState, FleetPlanes,
                    action_index, action_offset, action_to_zone, encode_state, fleet_planes)
