"""Test suite for semistab."""
