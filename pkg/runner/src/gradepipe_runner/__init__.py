"""In-sandbox runner: executes an instructor test suite against a student
module and writes a machine-readable report file."""

__version__ = "0.1.0"
