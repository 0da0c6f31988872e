"""Utility modules for semistab."""
