# core/bench/reports.py
"""
Tabelas do benchmark e os três formatos de saída: texto de largura fixa,
jsonl (um registro por linha, chaves ordenadas) e PDF (reportlab).
Nenhum formato carrega data/hora, então reexecuções geram os mesmos bytes.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Set

from core.config import Config
from core.utils import format_metric, format_percent

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['F-ECE', 'LogLoss', 'NDCG', 'AUC']
LOWER_IS_BETTER = {'F-ECE', 'LogLoss', 'Misordered'}
PERCENT_COLUMNS = {'Misordered'}


@dataclass
class ReportRow:
    name: str
    values: Dict[str, Optional[float]]
    significant: Dict[str, bool] = field(default_factory=dict)


@dataclass
class ReportTable:
    title: str
    run_id: str
    columns: List[str]
    rows: List[ReportRow] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)
    bins: int = Config.ECE_BINS
    reference: Optional[str] = None       # linha contra a qual a significância é testada
    footnotes: List[str] = field(default_factory=list)

    @property
    def has_significance(self) -> bool:
        return self.reference is not None

    def best_rows(self, column: str) -> Set[int]:
        """Índices das linhas com o melhor valor da coluna (empates incluídos)."""
        present = [(i, r.values.get(column)) for i, r in enumerate(self.rows)]
        present = [(i, v) for i, v in present if v is not None]
        if not present:
            return set()
        pick = min if column in LOWER_IS_BETTER else max
        best = pick(v for _, v in present)
        return {i for i, v in present if v == best}

    def format_value(self, column: str, value: Optional[float]) -> str:
        if column in PERCENT_COLUMNS:
            return format_percent(value)
        return format_metric(value)

    def cell(self, row_idx: int, column: str, best: Optional[Set[int]] = None) -> str:
        row = self.rows[row_idx]
        text = self.format_value(column, row.values.get(column))
        best = self.best_rows(column) if best is None else best
        if row_idx in best:
            text = f"[{text}]"
        if row.significant.get(column):
            text = f"*{text}"
        return text

    def cells(self) -> List[List[str]]:
        best = {c: self.best_rows(c) for c in self.columns}
        return [[r.name] + [self.cell(i, c, best[c]) for c in self.columns] for i, r in enumerate(self.rows)]


def render_text(table: ReportTable) -> str:
    body = table.cells()
    name_w = max([len('Method')] + [len(r[0]) for r in body]) + 2
    col_w = max([12] + [len(c) + 2 for c in table.columns] + [len(v) + 2 for r in body for v in r[1:]])
    lines = [
        table.title,
        f"run {table.run_id}  seeds={','.join(str(s) for s in table.seeds)}  M={table.bins}",
        '',
        'Method'.ljust(name_w) + ''.join(c.rjust(col_w) for c in table.columns),
        '-' * (name_w + col_w * len(table.columns)),
    ]
    for r in body:
        lines.append(r[0].ljust(name_w) + ''.join(v.rjust(col_w) for v in r[1:]))
    if table.footnotes:
        lines.append('')
        lines.extend(table.footnotes)
    return '\n'.join(lines) + '\n'


def write_text_report(table: ReportTable, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render_text(table), encoding='utf-8')
    return p


def write_jsonl(records: Iterable[Dict[str, Any]], path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(rec, sort_keys=True, ensure_ascii=False) for rec in records]
    p.write_text('\n'.join(lines) + ('\n' if lines else ''), encoding='utf-8')
    return p


def write_pdf_report(table: ReportTable, path, config=Config) -> Path:
    from core.pdf.pdf_service import PDFService

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(PDFService(config).generate_pdf(table))
    return p
