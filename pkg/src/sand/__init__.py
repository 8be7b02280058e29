"""Self-taught action deliberation: synthesize deliberation trajectories for agent finetuning."""

__version__ = "0.1.0"
