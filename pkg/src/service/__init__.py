"""Package initialization for the service layer."""
