"""Real-time user-in-the-loop note-taking engine.

The engine turns a timed transcript stream into selectable keywords and
LLM-organized candidate sentences, and lets a user compose notes in a few
selection steps.  Everything is driven through a single injectable
scheduler, so the same code paths run live (wall clock) and under
deterministic replay (virtual clock).
"""

__version__ = "0.1.0"
