# Utilities package: logging, exceptions and shared helpers
