"""Generating vector fields for Lie-bracket extremum seeking."""
