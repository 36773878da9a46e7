"""
Output Formatting Utilities
===========================

Console text of every subcommand. Formatters return strings; emit_output
prints them or hands them to a callback.
"""

from __future__ import annotations

from collections.abc import Callable
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from hgct.counting import CostReport
    from hgct.verification import GradcheckSummary
    from training.ablation import AblationTable
    from training.fusion import ScoreSet
    from training.trainer import EvalResult, RunReport

OutputCallback = Callable[[str], None]

SEPARATOR_HEAVY = "=" * 70
SEPARATOR_LIGHT = "-" * 70


def emit_output(on_output: OutputCallback | None, message: str) -> None:
    """Emit output to callback or print."""
    if on_output:
        on_output(message)
    else:
        print(message, end="" if message.endswith("\n") else "\n")


def format_header(title: str) -> str:
    return f"{SEPARATOR_HEAVY}\n  {title}\n{SEPARATOR_HEAVY}"


def _millions(n: int) -> str:
    return f"{n / 1e6:.3f}M"


def format_cost_report(report: CostReport, per_block: bool = False) -> str:
    """Parameter total and the MAC / 2xMAC pair, optionally itemized."""
    lines = [
        f"Input geometry: T={report.frames}, V={report.joints}",
        f"Parameters:     {report.params:,} ({_millions(report.params)})",
        f"MACs:           {report.macs:,} ({report.macs / 1e9:.3f}G)",
        f"FLOPs (2xMAC):  {report.flops_2x:,} ({report.flops_2x / 1e9:.3f}G)",
    ]
    if per_block:
        lines.append(SEPARATOR_LIGHT)
        lines.append(f"{'block':<16}{'params':>14}{'MACs':>18}")
        for block in report.blocks:
            lines.append(f"{block.name:<16}{block.params:>14,}{block.macs:>18,}")
    return "\n".join(lines)


def format_gradcheck_summary(summary: GradcheckSummary) -> str:
    from hgct.verification import GRADCHECK_TOLERANCE

    lines = [f"{'block':<20}{'max rel. error':>16}  status"]
    for block, error in summary.worst_by_block().items():
        status = "ok" if error < GRADCHECK_TOLERANCE else "FAIL"
        lines.append(f"{block:<20}{error:>16.3e}  {status}")
    lines.append(SEPARATOR_LIGHT)
    verdict = "PASSED" if summary.passed else "FAILED"
    lines.append(
        f"{verdict}: {len(summary.results)} checks, max error {summary.max_error:.3e} (tol {GRADCHECK_TOLERANCE:g})"
    )
    return "\n".join(lines)


def format_run_report(report: RunReport) -> str:
    lines = [f"{'epoch':>5}{'loss':>10}{'train':>9}{'test':>9}{'lr':>10}"]
    for e in report.epochs:
        lines.append(
            f"{e.epoch + 1:>5}{e.train_loss:>10.4f}{e.train_accuracy:>9.3f}{e.test_accuracy:>9.3f}{e.lr:>10.5f}"
        )
    lines.append(SEPARATOR_LIGHT)
    lines.append(
        f"Final test accuracy {report.final_test_accuracy:.4f} "
        f"(best {report.best_test_accuracy:.4f}) in {report.wall_time:.1f}s"
    )
    if report.early_stopped:
        lines.append(f"Stopped early after {len(report.epochs)} epochs")
    if report.checkpoint_path:
        lines.append(f"Checkpoint: {report.checkpoint_path}")
    return "\n".join(lines)


def format_eval_result(result: EvalResult) -> str:
    lines = [f"Top-1 accuracy: {result.accuracy:.4f} on {len(result.scores.labels)} samples"]
    for k, value in enumerate(result.per_class):
        if value is not None:
            lines.append(f"  class {k:>3}: {value:.3f}")
    return "\n".join(lines)


def format_fusion(streams: list[tuple[str, ScoreSet]], weights: list[float], fused: ScoreSet) -> str:
    lines = [f"{'stream':<40}{'weight':>8}{'accuracy':>10}"]
    for (name, scores), weight in zip(streams, weights, strict=True):
        lines.append(f"{name[-40:]:<40}{weight:>8g}{scores.accuracy:>10.4f}")
    lines.append(SEPARATOR_LIGHT)
    lines.append(f"{'fused':<40}{'':>8}{fused.accuracy:>10.4f}")
    return "\n".join(lines)


def format_ablation_table(table: AblationTable) -> str:
    lines = [f"Ablation axis: {table.axis.value}", f"{'setting':<36}{'params':>12}{'accuracy':>10}"]
    for row in table.rows:
        accuracy = "-" if row.accuracy is None else f"{row.accuracy:.4f}"
        lines.append(f"{row.setting:<36}{_millions(row.params):>12}{accuracy:>10}")
    return "\n".join(lines)
