"""Emotional-support robot stack: perception, dialogue, and a consent-gated
hug automaton over simulated hardware."""

__version__ = "0.1.0"
