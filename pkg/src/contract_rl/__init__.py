"""Principal-agent reinforcement learning on hidden-action MDPs."""
__version__ = "0.1.0"
