# core/pdf/font_manager.py
import logging
import os

from reportlab.pdfbase import pdfmetrics
from reportlab.pdfbase.ttfonts import TTFont

logger = logging.getLogger(__name__)


class FontManager:
    """
    Registra TTFs informados no config (FONT_REGULAR_PATH / FONT_BOLD_PATH).
    Sem caminho válido ficam as fontes base Helvetica, que não precisam ser
    embutidas.
    """
    def __init__(self, config=None):
        self.FONT_REGULAR = 'Helvetica'
        self.FONT_BOLD = 'Helvetica-Bold'
        if config is not None:
            self._setup_fonts(config)

    def _register(self, name, path):
        if not path or not os.path.exists(path):
            return False
        try:
            pdfmetrics.registerFont(TTFont(name, path))
            return True
        except Exception as e:
            logger.warning("fonte %s não registrada (%s): %s", name, path, e)
            return False

    def _setup_fonts(self, config):
        reg_name = getattr(config, 'FONT_REGULAR_NAME', 'ReportRegular')
        bold_name = getattr(config, 'FONT_BOLD_NAME', 'ReportBold')
        if self._register(reg_name, getattr(config, 'FONT_REGULAR_PATH', None)):
            self.FONT_REGULAR = reg_name
        if self._register(bold_name, getattr(config, 'FONT_BOLD_PATH', None)):
            self.FONT_BOLD = bold_name
