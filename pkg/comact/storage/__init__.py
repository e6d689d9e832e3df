"""
Persistence of runs: configuration snapshots, checkpoints, training histories and analysis results.
"""
