"""
Command-line front end: argument routing and plain-text run configuration.
"""
