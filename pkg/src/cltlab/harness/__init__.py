"""Experiment orchestration, verification suite and command-line entry point."""
