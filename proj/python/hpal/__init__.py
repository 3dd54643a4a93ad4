"""Hierarchical uncertainty active learning for point clouds."""

from ._hpal import (
    HpalError,
    active_loop,
    ema_update,
    fds_select,
    gen_synthetic,
    load_ply,
    local_geometric_features,
    miou,
    parse_config,
    point_margin,
    rank_candidates,
    save_ply,
    score_hmmu,
    score_points,
    strategy_names,
)

__all__ = [
    "HpalError",
    "active_loop",
    "ema_update",
    "fds_select",
    "gen_synthetic",
    "load_ply",
    "local_geometric_features",
    "miou",
    "parse_config",
    "point_margin",
    "rank_candidates",
    "save_ply",
    "score_hmmu",
    "score_points",
    "strategy_names",
]
