"""Benchmark harness: synthetic datasets, baselines, metrics, CLI."""
