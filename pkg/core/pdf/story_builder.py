# core/pdf/story_builder.py
from reportlab.platypus import Paragraph, Spacer

from .tables_builder import MetricsTableBuilder, sanitize_for_paragraph


class StoryBuilder:
    def __init__(self, config, styles, pad_small, pad_med, usable_w, line_width, gray):
        self.config = config
        self.styles = styles
        self.pad_small = pad_small
        self.pad_med = pad_med
        self.usable_w = usable_w
        self.metrics_builder = MetricsTableBuilder(styles, gray, line_width, pad_small)

    def build_story(self, table):
        """Título, linha de execução (run, seeds, M), tabela e notas de rodapé."""
        story = [
            Paragraph(sanitize_for_paragraph(table.title), self.styles['TitleCenter']),
            Paragraph(
                sanitize_for_paragraph(
                    f"run {table.run_id} | seeds {', '.join(str(s) for s in table.seeds)} | M={table.bins}"),
                self.styles['subtitle']),
            Spacer(1, self.pad_med),
            self.metrics_builder.build(table, self.usable_w),
        ]
        if table.footnotes:
            story.append(Spacer(1, self.pad_med * 2))
            for note in table.footnotes:
                story.append(Paragraph(sanitize_for_paragraph(note), self.styles['muted']))
        return story
