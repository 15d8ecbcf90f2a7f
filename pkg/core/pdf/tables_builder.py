# core/pdf/tables_builder.py
from xml.sax.saxutils import escape as xml_escape

from reportlab.lib import colors
from reportlab.platypus import Paragraph, Table, TableStyle


def sanitize_for_paragraph(text):
    if text is None:
        return ''
    txt = str(text).replace('\r\n', '\n').replace('\r', '\n')
    return xml_escape(txt).replace('\n', '<br/>')


class MetricsTableBuilder:
    """
    Tabela Método x métricas. Cabeçalho cinza, melhor valor da coluna em
    negrito e '*' quando a diferença contra a referência é significativa.
    """
    def __init__(self, styles, gray, line_width, pad_small):
        self.styles = styles
        self.GRAY = gray
        self.LINE_WIDTH = line_width
        self.pad_small = pad_small

    def _column_widths(self, n_metrics, usable_w):
        name_w = usable_w * 0.34
        metric_w = (usable_w - name_w) / max(n_metrics, 1)
        widths = [int(round(name_w))] + [int(round(metric_w))] * n_metrics
        # resto do arredondamento na última coluna
        widths[-1] += int(round(usable_w)) - sum(widths)
        return widths

    def _value_cell(self, table, row_idx, column, best):
        row = table.rows[row_idx]
        text = table.format_value(column, row.values.get(column))
        if row.significant.get(column):
            text = f"*{text}"
        style = self.styles['td_right_bold'] if row_idx in best else self.styles['td_right']
        return Paragraph(sanitize_for_paragraph(text), style)

    def build(self, table, usable_w):
        header = [Paragraph('Method', self.styles['label_center'])]
        header += [Paragraph(sanitize_for_paragraph(c), self.styles['label_center']) for c in table.columns]
        data = [header]
        best = {c: table.best_rows(c) for c in table.columns}
        for i, row in enumerate(table.rows):
            cells = [Paragraph(sanitize_for_paragraph(row.name), self.styles['td_left'])]
            cells += [self._value_cell(table, i, c, best[c]) for c in table.columns]
            data.append(cells)

        pdf_table = Table(data, colWidths=self._column_widths(len(table.columns), usable_w), repeatRows=1)
        pdf_table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), self.GRAY),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.black),
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
            ('BOX', (0, 0), (-1, -1), self.LINE_WIDTH, colors.black),
            ('INNERGRID', (0, 0), (-1, -1), self.LINE_WIDTH / 2.0, colors.black),
            ('LEFTPADDING', (0, 0), (-1, -1), max(1, self.pad_small)),
            ('RIGHTPADDING', (0, 0), (-1, -1), max(1, self.pad_small)),
            ('TOPPADDING', (0, 0), (-1, -1), 1),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 1),
        ]))
        return pdf_table
