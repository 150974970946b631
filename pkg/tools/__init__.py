"""Command groups of the stfr command line."""
