# core/pdf/pdf_service.py
import io

from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.units import inch
from reportlab.platypus import BaseDocTemplate, Frame, PageTemplate

from .font_manager import FontManager
from .footer_drawer import FooterDrawer
from .story_builder import StoryBuilder
from .styles_builder import make_styles


class PDFService:
    """Renderiza um ReportTable do benchmark em PDF (bytes reprodutíveis)."""

    def __init__(self, config):
        self.config = config

        self.LINE_WIDTH = float(getattr(self.config, 'LINE_WIDTH', 0.6))
        gray_hex = getattr(self.config, 'LINE_GRAY_HEX', '#D9D9D9')
        try:
            self.GRAY = colors.HexColor(str(gray_hex))
        except ValueError:
            self.GRAY = colors.HexColor('#D9D9D9')

        # paddings (pts)
        self.SMALL_PAD = int(getattr(self.config, 'SMALL_PAD', 2))
        self.MED_PAD = int(getattr(self.config, 'MED_PAD', 3))

        self.BASE_TITLE_FONT_SIZE = float(getattr(self.config, 'TITLE_FONT_SIZE', 10.0))
        self.BASE_LABEL_FONT_SIZE = float(getattr(self.config, 'LABEL_FONT_SIZE', 8.2))
        self.BASE_VALUE_FONT_SIZE = float(getattr(self.config, 'VALUE_FONT_SIZE', 8.2))

        fm = FontManager(config=self.config)
        self.FONT_REGULAR = fm.FONT_REGULAR
        self.FONT_BOLD = fm.FONT_BOLD

        self.MARGIN = float(getattr(self.config, 'PAGE_MARGIN_INCH', 0.6)) * inch
        self.footer_h_base = float(getattr(self.config, 'FOOTER_H_INCH', 0.22)) * inch

    def generate_pdf(self, table) -> bytes:
        pdf_buffer = io.BytesIO()
        PAGE_W, PAGE_H = letter
        MARG = self.MARGIN
        usable_w = PAGE_W - 2 * MARG

        frame_bottom = MARG + self.footer_h_base
        frame_height = max(1.0 * inch, PAGE_H - MARG - frame_bottom)

        styles, ps, pm = make_styles(
            self.config,
            self.FONT_REGULAR,
            self.FONT_BOLD,
            self.SMALL_PAD,
            self.MED_PAD,
            self.BASE_TITLE_FONT_SIZE,
            self.BASE_LABEL_FONT_SIZE,
            self.BASE_VALUE_FONT_SIZE,
        )
        footer = FooterDrawer(self.BASE_VALUE_FONT_SIZE, self.LINE_WIDTH, self.GRAY, self.footer_h_base)
        story = StoryBuilder(self.config, styles, ps, pm, usable_w, self.LINE_WIDTH, self.GRAY).build_story(table)

        # invariant=1: sem data de criação nem id aleatório no arquivo
        doc = BaseDocTemplate(
            pdf_buffer,
            pagesize=letter,
            leftMargin=MARG,
            rightMargin=MARG,
            topMargin=MARG,
            bottomMargin=MARG,
            title=table.title,
            invariant=1,
        )
        content_frame = Frame(MARG, frame_bottom, usable_w, frame_height,
                              leftPadding=0, rightPadding=0, topPadding=4, bottomPadding=4, id='content_frame')

        def on_page_template(canvas, doc_local):
            footer.on_page_template(canvas, doc_local, table.run_id, usable_w, MARG)

        doc.addPageTemplates([PageTemplate(id='normal', frames=[content_frame], onPage=on_page_template)])
        doc.build(story)
        return pdf_buffer.getvalue()
