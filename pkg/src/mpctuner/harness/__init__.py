"""Experiment orchestration: CLI, comparison reports, statistics and the
teleoperation service."""
