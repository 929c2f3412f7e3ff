"""Package root for the magnon toolkit."""
