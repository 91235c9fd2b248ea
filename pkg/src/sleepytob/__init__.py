"""Graded Agreement and Total-Order Broadcast under dynamic participation."""
