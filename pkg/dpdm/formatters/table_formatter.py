"""Format run results as rich console tables."""

import math
from typing import Dict, Optional, Sequence

from rich.console import Console
from rich.table import Table

from .color_scheme import ColorScheme
from ..evaluation.ablations import AblationRow, summarize
from ..evaluation.models import FidResult, SelectionStudy
from ..privacy.models import PrivacySpend
from ..training.models import TrainResult


def _fmt(value: Optional[float], digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    if isinstance(value, float) and math.isinf(value):
        return "∞"
    return f"{value:.{digits}f}"


class TableFormatter:
    """Format run results as rich console tables."""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()
        self.colors = ColorScheme()

    def _header(self, title: str) -> None:
        self.console.print(f"\n[{self.colors.HEADER}]{title}[/{self.colors.HEADER}]")

    def _table(self, title: str, *columns: str) -> Table:
        table = Table(title=title, show_header=True, header_style=self.colors.TABLE_HEADER)
        table.add_column(columns[0], style=self.colors.KEY)
        for column in columns[1:]:
            table.add_column(column, justify="right")
        return table

    def print_train_result(self, title: str, result: TrainResult, spend: Optional[PrivacySpend] = None) -> None:
        """Summary of a training run: status, step count, last losses and privacy spent."""
        self._header(title)
        if result.budget_exhausted:
            status = f"[{self.colors.BUDGET_EXHAUSTED}]{result.status}[/{self.colors.BUDGET_EXHAUSTED}]"
        else:
            status = f"[{self.colors.SUCCESS}]{result.status}[/{self.colors.SUCCESS}]"
        self.console.print(f"Status: {status}")
        self.console.print(f"Steps: {result.steps_completed}")

        if result.log:
            table = self._table("Training Log (last steps)", "Step", "Loss", "Median clipped norm", "Epsilon")
            for stats in result.log[-5:]:
                table.add_row(
                    str(stats.step),
                    _fmt(stats.loss),
                    _fmt(stats.grad_norm_median_clipped, 6),
                    _fmt(stats.epsilon_spent, 3),
                )
            self.console.print(table)
        if spend is not None:
            self.print_privacy(spend)

    def print_privacy(self, spend: PrivacySpend, noise_multiplier: Optional[float] = None) -> None:
        line = f"Privacy: [{self.colors.EPSILON}]ε = {_fmt(spend.epsilon, 3)}[/{self.colors.EPSILON}], δ = {spend.delta:.3g}"
        if noise_multiplier is not None:
            line += f", σ = {noise_multiplier:.4f}"
        self.console.print(line)

    def print_key_values(self, title: str, values: Dict[str, object]) -> None:
        table = self._table(title, "Setting", "Value")
        for key, value in values.items():
            table.add_row(key, _fmt(value) if isinstance(value, float) else str(value))
        self.console.print(table)

    def print_fid(self, result: FidResult) -> None:
        table = self._table("Fréchet Distance", "Scope", "FID")
        table.add_row("all", _fmt(result.score))
        for c, score in sorted(result.per_class.items()):
            table.add_row(f"class {c}", _fmt(score))
        self.console.print(table)
        if result.regularized:
            self.console.print(
                f"[{self.colors.WARNING}]Fewer samples than feature dimensions: covariances were regularised[/{self.colors.WARNING}]"
            )

    def print_selection(self, study: SelectionStudy) -> None:
        table = self._table("Model Selection", "Config", "Synthetic (a)", "Real (a)", "Real (b)")
        for a, b in zip(study.setting_a, study.setting_b):
            table.add_row(a.key, _fmt(a.accuracy_synthetic), _fmt(a.accuracy_real), _fmt(b.accuracy_real))
        self.console.print(table)
        self.console.print(f"Spearman ρ: setting a = {_fmt(study.rho_a, 3)}, setting b = {_fmt(study.rho_b, 3)}")
        self.console.print(
            f"Best real config in synthetic top 2: a = {study.best_real_in_top2_a}, b = {study.best_real_in_top2_b}"
        )

    def print_ablation(self, rows: Sequence[AblationRow]) -> None:
        table = self._table("Ablations (mean over seeds)", "Study", "Variant", "Metric", "Mean")
        for (study, variant, metric), value in sorted(summarize(rows).items()):
            table.add_row(study, variant, metric, _fmt(value))
        self.console.print(table)
