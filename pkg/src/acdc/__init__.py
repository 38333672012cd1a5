"""Goal-conditioned RL toolkit: adaptive curriculum scoring over replayed
trajectories plus contrastive, magnitude-guided experience selection, closed
into a DDPG+HER training loop on small 2-D tasks."""

__version__ = "0.1.0"
