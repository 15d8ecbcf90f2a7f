# core/pdf/footer_drawer.py
from reportlab.lib import colors


class FooterDrawer:
    def __init__(self, base_value_font_size, line_width, gray_color, footer_h_base):
        self.BASE_VALUE_FONT_SIZE = base_value_font_size
        self.LINE_WIDTH = line_width
        self.GRAY = gray_color
        self.footer_h_base = footer_h_base

    def draw_footer(self, canvas, doc_local, run_id, usable_w, left_margin):
        canvas.saveState()
        footer_y = doc_local.bottomMargin
        canvas.setFillColor(self.GRAY)
        canvas.rect(left_margin, footer_y, usable_w, self.footer_h_base, stroke=0, fill=1)
        canvas.setFillColor(colors.black)
        canvas.setFont("Helvetica", max(6, int(self.BASE_VALUE_FONT_SIZE) - 1))
        text_y = footer_y + self.footer_h_base / 2.0 - 3
        canvas.drawString(left_margin + 4, text_y, f"run {run_id}")
        canvas.drawRightString(left_margin + usable_w - 4, text_y, f"Página {canvas.getPageNumber()}")
        canvas.restoreState()

    def on_page_template(self, canvas, doc_local, run_id, usable_w, left_margin):
        # helper para PageTemplate.onPage
        self.draw_footer(canvas, doc_local, run_id, usable_w, left_margin)
