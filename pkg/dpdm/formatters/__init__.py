"""Output formatters for console tables and TSV reports."""

from .color_scheme import ColorScheme
from .table_formatter import TableFormatter
from .tsv_writer import TsvWriter

__all__ = ["ColorScheme", "TableFormatter", "TsvWriter"]
