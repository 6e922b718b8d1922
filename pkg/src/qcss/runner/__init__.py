"""Config loading, match orchestration, traces, statistics and experiments."""
from .config import AgentGroup, ConfigError, RunConfig, load_config, parse_config
from .match import MatchResult, ReplayReport, replay, run_match
from .stats import MatchStats, compute_stats, stats
from .trace import TraceError, TraceFile, read_trace, write_trace

__all__ = [
    "AgentGroup",
    "ConfigError",
    "MatchResult",
    "MatchStats",
    "ReplayReport",
    "RunConfig",
    "TraceError",
    "TraceFile",
    "compute_stats",
    "load_config",
    "parse_config",
    "read_trace",
    "replay",
    "run_match",
    "stats",
    "write_trace",
]
