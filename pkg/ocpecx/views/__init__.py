"""Views package."""

FLOAT_FORMAT = "%.17g"
