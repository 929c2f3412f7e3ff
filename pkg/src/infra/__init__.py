"""
Infrastructure module for system-level concerns: telemetry and the invariant suite.
"""
