"""Controllable time series generation."""
