"""Package initialization for the numerical backend layer."""
