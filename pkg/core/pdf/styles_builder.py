# core/pdf/styles_builder.py
from reportlab.lib import colors
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet


def make_styles(config, font_regular, font_bold, small_pad, med_pad, base_title_sz, base_label_sz, base_value_sz):
    """
    Cria e retorna (styles, pad_small, pad_med) para as tabelas de métricas.
    Tamanhos vêm do config e ficam entre MIN_FONT_SIZE e MAX_FONT_SIZE.
    """

    def _num(x, fallback):
        try:
            if x is None:
                return float(fallback)
            return float(x)
        except (TypeError, ValueError):
            return float(fallback)

    lo = float(getattr(config, 'MIN_FONT_SIZE', 6.0))
    hi = float(getattr(config, 'MAX_FONT_SIZE', 72.0))

    def _clamp(v):
        return max(lo, min(hi, v))

    title_sz = _clamp(_num(base_title_sz, 10.0))
    label_sz = _clamp(_num(base_label_sz, 8.2))
    value_sz = _clamp(_num(base_value_sz, 8.2))

    pad_small = max(0, int(small_pad if small_pad is not None else getattr(config, 'SMALL_PAD', 2)))
    pad_med = max(0, int(med_pad if med_pad is not None else getattr(config, 'MED_PAD', 3)))

    styles = getSampleStyleSheet()

    def add_or_update(name, **kwargs):
        if name in styles:
            s = styles[name]
            for k, v in kwargs.items():
                setattr(s, k, v)
        else:
            styles.add(ParagraphStyle(name=name, **kwargs))

    add_or_update('TitleCenter',
        fontName=font_bold,
        fontSize=title_sz,
        alignment=1,
        leading=max(8, title_sz * 1.15),
        spaceAfter=pad_med,
    )

    add_or_update('subtitle',
        fontName=font_regular,
        fontSize=value_sz,
        alignment=1,
        leading=max(7, value_sz * 1.1),
        textColor=colors.HexColor('#444444'),
        spaceAfter=pad_med,
    )

    add_or_update('label_center',
        fontName=font_bold,
        fontSize=label_sz,
        leading=max(7, label_sz * 1.05),
        alignment=1,
    )

    add_or_update('td_left', fontName=font_regular, fontSize=value_sz, alignment=0,
                  leading=max(7, value_sz * 1.06))
    add_or_update('td_right', fontName=font_regular, fontSize=value_sz, alignment=2,
                  leading=max(7, value_sz * 1.06))
    # melhor valor da coluna
    add_or_update('td_right_bold', fontName=font_bold, fontSize=value_sz, alignment=2,
                  leading=max(7, value_sz * 1.06))

    add_or_update('muted', fontName=font_regular, fontSize=max(6, int(value_sz * 0.9)),
                  leading=max(7, value_sz * 0.95), textColor=colors.grey)

    return styles, pad_small, pad_med
