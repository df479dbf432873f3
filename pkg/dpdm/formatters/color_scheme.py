"""Console styles for run summaries."""


class ColorScheme:
    """Rich style strings used by the table formatter."""

    # Run status
    SUCCESS = "green"
    BUDGET_EXHAUSTED = "red bold"
    WARNING = "yellow"

    # Tables
    HEADER = "bold cyan"
    TABLE_HEADER = "bold magenta"
    KEY = "cyan"

    # Privacy spend
    EPSILON = "bold yellow"
