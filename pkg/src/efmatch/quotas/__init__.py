"""Hospital quota families and their compiled rank/cover oracles."""
