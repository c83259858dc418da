"""Test package for delay-sync."""
