"""Shortcut learning for abstract planning: a bilevel abstract planner over a
deterministic 2D manipulation environment, plus reinforcement-learned shortcut
options that shorten its plans."""

__version__ = "0.1.0"
