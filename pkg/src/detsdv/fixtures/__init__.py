"""Packaged scenario fixtures: descriptor + topology TOML pairs."""
