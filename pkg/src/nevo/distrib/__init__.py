"""Coordinator/worker execution of the evolution loops."""

from .protocol import bench_comm, pair_selected_to_unselected, run_distributed_adversarial, run_distributed_score

__all__ = ["bench_comm", "pair_selected_to_unselected", "run_distributed_adversarial", "run_distributed_score"]
