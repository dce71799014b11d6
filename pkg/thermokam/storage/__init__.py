"""CSV tables, key=value summaries and SVG figures written by the commands."""
