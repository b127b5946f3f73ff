"""Test package for wlident."""
