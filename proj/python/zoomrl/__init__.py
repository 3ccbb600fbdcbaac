"""Glance-then-zoom agentic video QA engine.

Thin wrapper around the compiled extension. The synthetic environment,
turn-grammar parser, scripted policies, reward math and GRPO kernels all live
in C++; this package re-exports the bound surface.
"""

from zoomrl._core import (  # noqa: F401
    BudgetConfig,
    EpisodeConfig,
    GenParams,
    Observation,
    Question,
    RewardBreakdown,
    RewardWeights,
    SyntheticVideo,
    Task,
    ToolCall,
    Trajectory,
    answer_from_frames,
    dense_oracle,
    extract_answer,
    generate,
    grpo,
    parse_turn,
    reasoning_system_prompt,
    reflection_system_prompt,
    render_tool_call,
    requested_frames,
    run_episode,
    task_from_json,
    total_reward,
    trajectory_from_json,
    uniform_glance,
    zoom,
)

__all__ = [
    "BudgetConfig",
    "EpisodeConfig",
    "GenParams",
    "Observation",
    "Question",
    "RewardBreakdown",
    "RewardWeights",
    "SyntheticVideo",
    "Task",
    "ToolCall",
    "Trajectory",
    "answer_from_frames",
    "dense_oracle",
    "extract_answer",
    "generate",
    "grpo",
    "parse_turn",
    "reasoning_system_prompt",
    "reflection_system_prompt",
    "render_tool_call",
    "requested_frames",
    "run_episode",
    "task_from_json",
    "total_reward",
    "trajectory_from_json",
    "uniform_glance",
    "zoom",
]
