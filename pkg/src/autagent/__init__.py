"""Learned audio-tool selection: a GRPO-trained policy, a simulated reasoner and real DSP tools."""

from .core import NUM_TOOLS, TOOL_NAMES, Category, TaskInstance, ToolOutput, ToolSet, Verdict
from .policy import PolicyParams, greedy_action, inclusion_probs, sample_action
from .simenv import ReasonerProfile, SimEnvironment, default_env
from .trainer import RewardMode, TrainConfig, differential_reward, binary_reward, group_advantages, train

__version__ = "0.1.0"
