"""
Plots rendered from run directories.
"""
