"""delay-sync source package."""
