"""One line per acceptance criterion, printed at the end of the run by conftest."""

LINES: dict[int, str] = {}
