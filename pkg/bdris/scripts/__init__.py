"""Command-line scripts of the BD-RIS toolkit."""
