"""Tests for the environments, agents and evaluation harness."""
