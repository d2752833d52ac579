"""Headless scene server streaming pixel-annotated camera views.

Simulates rigid-body scenes, renders color, category, instance, motion-field
and depth views from a movable agent camera, and serves them over a small
binary TCP protocol. See the cli module for the operator entry points.
"""

__version__ = "0.1.0"
