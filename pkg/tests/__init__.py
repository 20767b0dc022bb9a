"""Test suite for the count-based anti-exploration pipeline."""
