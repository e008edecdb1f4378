"""Reward shaping, policy/value network, PPO and the training loop."""
