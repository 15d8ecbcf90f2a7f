# core/dataio.py
"""
Formato de dataset em texto (uma linha por item), leitura/escrita, divisão
treino/teste por listagem e montagem do conjunto de calibração a partir dos
scores do ranker.

Formato:
    # mlplatt-dataset version=1 ctx_dim=.. item_dim=.. field=<nome> ground_truth=0|1 scores=0|1
    listing_id<TAB>field<TAB>ctx_0..<TAB>item_0..<TAB>click[<TAB>true_ctr][<TAB>r]
    <linhas>

Números são escritos com repr() do float64, que faz round-trip exato.
"""
import logging
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.config import Config
from core.errors import DatasetParseError, InputError, SchemaError, ShapeError

logger = logging.getLogger(__name__)

FORMAT_NAME = 'mlplatt-dataset'
FORMAT_VERSION = 1


@dataclass
class Listing:
    listing_id: int
    x_ctx: np.ndarray          # (ctx_dim,)
    field: str
    x_item: np.ndarray         # (k, item_dim)
    click: np.ndarray          # (k,)
    true_ctr: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.click)


# nome usado nos módulos de geração sintética
SyntheticListing = Listing


def _as_matrix(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        return a
    return a.reshape(n, -1) if n else a.reshape(0, 0)


@dataclass
class Dataset:
    listing_id: np.ndarray
    field: np.ndarray
    x_ctx: np.ndarray
    x_item: np.ndarray
    click: np.ndarray
    true_ctr: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    field_name: str = 'field'
    meta: Dict[str, Any] = dc_field(default_factory=dict)

    def __post_init__(self):
        n = len(self.listing_id)
        self.listing_id = np.asarray(self.listing_id, dtype=np.int64)
        self.field = np.asarray(self.field, dtype=str)
        self.x_ctx = _as_matrix(self.x_ctx, n)
        self.x_item = _as_matrix(self.x_item, n)
        self.click = np.asarray(self.click, dtype=np.float64)
        if self.true_ctr is not None:
            self.true_ctr = np.asarray(self.true_ctr, dtype=np.float64)
        if self.r is not None:
            self.r = np.asarray(self.r, dtype=np.float64)
        for name in ('field', 'x_ctx', 'x_item', 'click', 'true_ctr', 'r'):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise SchemaError(f"coluna {name} com {len(arr)} linhas, esperado {n}")

    def __len__(self):
        return len(self.listing_id)

    @property
    def ctx_dim(self) -> int:
        return int(self.x_ctx.shape[1])

    @property
    def item_dim(self) -> int:
        return int(self.x_item.shape[1])

    @property
    def has_ground_truth(self) -> bool:
        return self.true_ctr is not None

    def listing_bounds(self) -> List[Tuple[int, int, int]]:
        """(listing_id, início, fim) de cada bloco contíguo, na ordem do arquivo."""
        n = len(self)
        if n == 0:
            return []
        cuts = np.flatnonzero(np.diff(self.listing_id)) + 1
        starts = np.concatenate([[0], cuts])
        stops = np.concatenate([cuts, [n]])
        return [(int(self.listing_id[s]), int(s), int(e)) for s, e in zip(starts, stops)]

    @property
    def n_listings(self) -> int:
        return len(self.listing_bounds())

    def listing_ids(self) -> np.ndarray:
        return np.array([lid for lid, _, _ in self.listing_bounds()], dtype=np.int64)

    def listings(self) -> Iterator[Listing]:
        for lid, s, e in self.listing_bounds():
            yield Listing(
                listing_id=lid,
                x_ctx=self.x_ctx[s],
                field=str(self.field[s]),
                x_item=self.x_item[s:e],
                click=self.click[s:e],
                true_ctr=None if self.true_ctr is None else self.true_ctr[s:e],
                r=None if self.r is None else self.r[s:e],
            )

    def validate(self):
        seen = set()
        for lid, s, e in self.listing_bounds():
            if lid in seen:
                raise SchemaError(f"listagem {lid} não é contígua")
            seen.add(lid)
            if not np.all(self.x_ctx[s:e] == self.x_ctx[s]) or not np.all(self.field[s:e] == self.field[s]):
                raise SchemaError(f"listagem {lid} com x_ctx/field diferentes entre itens")
        if not np.all((self.click == 0.0) | (self.click == 1.0)):
            raise SchemaError("click fora de {0,1}")
        return self

    def take_rows(self, idx: np.ndarray) -> 'Dataset':
        return Dataset(
            listing_id=self.listing_id[idx],
            field=self.field[idx],
            x_ctx=self.x_ctx[idx],
            x_item=self.x_item[idx],
            click=self.click[idx],
            true_ctr=None if self.true_ctr is None else self.true_ctr[idx],
            r=None if self.r is None else self.r[idx],
            field_name=self.field_name,
            meta=dict(self.meta),
        )

    def subset(self, listing_ids: Sequence[int]) -> 'Dataset':
        """Mantém as listagens pedidas, na ordem original do dataset."""
        mask = np.isin(self.listing_id, np.asarray(list(listing_ids), dtype=np.int64))
        return self.take_rows(np.flatnonzero(mask))

    def with_scores(self, r: np.ndarray) -> 'Dataset':
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (len(self),):
            raise ShapeError(f"scores {r.shape} para dataset de {len(self)} linhas")
        return replace(self, r=r, meta=dict(self.meta))

    @classmethod
    def from_listings(cls, listings: Sequence[Listing], field_name: str = 'field') -> 'Dataset':
        if not listings:
            raise InputError("nenhuma listagem")
        sizes = [len(l) for l in listings]
        has_truth = all(l.true_ctr is not None for l in listings)
        has_r = all(l.r is not None for l in listings)
        return cls(
            listing_id=np.repeat([l.listing_id for l in listings], sizes),
            field=np.repeat([l.field for l in listings], sizes),
            x_ctx=np.repeat(np.stack([l.x_ctx for l in listings]), sizes, axis=0),
            x_item=np.concatenate([l.x_item for l in listings]),
            click=np.concatenate([l.click for l in listings]),
            true_ctr=np.concatenate([l.true_ctr for l in listings]) if has_truth else None,
            r=np.concatenate([l.r for l in listings]) if has_r else None,
            field_name=field_name,
        )


def empty_dataset(ctx_dim: int, item_dim: int, field_name: str = 'field', ground_truth: bool = False) -> Dataset:
    return Dataset(
        listing_id=np.zeros(0, dtype=np.int64),
        field=np.zeros(0, dtype=str),
        x_ctx=np.zeros((0, ctx_dim)),
        x_item=np.zeros((0, item_dim)),
        click=np.zeros(0),
        true_ctr=np.zeros(0) if ground_truth else None,
        field_name=field_name,
    )


# ----------------------------------------------------------------------------
# leitura / escrita
# ----------------------------------------------------------------------------

def _columns(ctx_dim: int, item_dim: int, ground_truth: bool, scores: bool) -> List[str]:
    cols = ['listing_id', 'field']
    cols += [f"ctx_{k}" for k in range(ctx_dim)]
    cols += [f"item_{k}" for k in range(item_dim)]
    cols.append('click')
    if ground_truth:
        cols.append('true_ctr')
    if scores:
        cols.append('r')
    return cols


def _fmt(v) -> str:
    return repr(float(v))


def write_dataset(dataset: Dataset, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    gt = dataset.true_ctr is not None
    sc = dataset.r is not None
    if any(c.isspace() for z in np.unique(dataset.field) for c in z) or any(c.isspace() for c in dataset.field_name):
        raise SchemaError("valores de campo não podem conter espaços")
    header = (f"# {FORMAT_NAME} version={FORMAT_VERSION} ctx_dim={dataset.ctx_dim} item_dim={dataset.item_dim} "
              f"field={dataset.field_name} ground_truth={int(gt)} scores={int(sc)}")
    lines = [header, '\t'.join(_columns(dataset.ctx_dim, dataset.item_dim, gt, sc))]
    for i in range(len(dataset)):
        row = [str(int(dataset.listing_id[i])), str(dataset.field[i])]
        row += [_fmt(v) for v in dataset.x_ctx[i]]
        row += [_fmt(v) for v in dataset.x_item[i]]
        row.append(str(int(dataset.click[i])))
        if gt:
            row.append(_fmt(dataset.true_ctr[i]))
        if sc:
            row.append(_fmt(dataset.r[i]))
        lines.append('\t'.join(row))
    p.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return p


def _parse_header(line: str) -> Dict[str, str]:
    tokens = line.lstrip('#').split()
    if not tokens or tokens[0] != FORMAT_NAME:
        raise DatasetParseError(f"header não reconhecido: {line[:60]!r}", 1)
    out = {}
    for tok in tokens[1:]:
        if '=' not in tok:
            raise DatasetParseError(f"token de header sem '=': {tok!r}", 1)
        k, v = tok.split('=', 1)
        out[k] = v
    for key in ('version', 'ctx_dim', 'item_dim', 'field', 'ground_truth', 'scores'):
        if key not in out:
            raise DatasetParseError(f"header sem {key}", 1)
    if int(out['version']) != FORMAT_VERSION:
        raise SchemaError(f"versão de formato não suportada: {out['version']}")
    return out


def read_dataset(path) -> Dataset:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset não encontrado: {p}")
    lines = p.read_text(encoding='utf-8').splitlines()
    if len(lines) < 2:
        raise DatasetParseError("arquivo sem header/colunas", len(lines) + 1)
    hdr = _parse_header(lines[0])
    try:
        ctx_dim, item_dim = int(hdr['ctx_dim']), int(hdr['item_dim'])
        gt, sc = hdr['ground_truth'] == '1', hdr['scores'] == '1'
    except ValueError as e:
        raise DatasetParseError(f"header inválido: {e}", 1) from e
    expected = _columns(ctx_dim, item_dim, gt, sc)
    cols = lines[1].split('\t')
    if cols != expected:
        raise SchemaError(f"colunas {cols} não batem com o header (esperado {expected})")

    n_cols = len(expected)
    rows = lines[2:]
    lid = np.zeros(len(rows), dtype=np.int64)
    fields: List[str] = []
    num = np.zeros((len(rows), n_cols - 2))
    for i, line in enumerate(rows):
        line_no = i + 3
        parts = line.split('\t')
        if len(parts) != n_cols:
            raise DatasetParseError(f"esperado {n_cols} colunas, encontrado {len(parts)}", line_no)
        try:
            lid[i] = int(parts[0])
            num[i] = [float(v) for v in parts[2:]]
        except ValueError as e:
            raise DatasetParseError(str(e), line_no) from e
        fields.append(parts[1])

    c0 = ctx_dim
    c1 = ctx_dim + item_dim
    ds = Dataset(
        listing_id=lid,
        field=np.array(fields, dtype=str) if fields else np.zeros(0, dtype=str),
        x_ctx=num[:, :c0],
        x_item=num[:, c0:c1],
        click=num[:, c1],
        true_ctr=num[:, c1 + 1] if gt else None,
        r=num[:, -1] if sc else None,
        field_name=hdr['field'],
    )
    return ds.validate()


# ----------------------------------------------------------------------------
# divisão treino/teste
# ----------------------------------------------------------------------------

def split(dataset: Dataset, test_fraction: float = Config.TEST_FRACTION, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Divide por listagem (nunca quebra uma listagem); determinístico pelo seed."""
    if not (0.0 < test_fraction < 1.0):
        raise InputError("test_fraction deve estar em (0, 1)")
    ids = dataset.listing_ids()
    if len(ids) < 2:
        raise InputError("são necessárias ao menos 2 listagens para dividir")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    n_test = int(round(len(ids) * test_fraction))
    n_test = min(max(n_test, 1), len(ids) - 1)
    test_ids = ids[perm[:n_test]]
    train_ids = ids[perm[n_test:]]
    return dataset.subset(train_ids), dataset.subset(test_ids)


# ----------------------------------------------------------------------------
# conjunto de calibração
# ----------------------------------------------------------------------------

def build_calibration_set(ranker, dataset: Dataset, context_source: str = 'raw'):
    """Um registro por item: (r do ranker, x_ctx, z, click, listing id)."""
    from core.calibrators.base import CalibrationSet
    from core.ranker import ranker_context_embedding, score_dataset

    if ranker.ctx_dim != dataset.ctx_dim or ranker.item_dim != dataset.item_dim:
        raise ShapeError(
            f"ranker espera ctx={ranker.ctx_dim}/item={ranker.item_dim}, dataset tem "
            f"ctx={dataset.ctx_dim}/item={dataset.item_dim}")
    r = score_dataset(ranker, dataset)
    if context_source == 'raw':
        x_ctx = dataset.x_ctx
    elif context_source == 'ranker_embedding':
        x_ctx = ranker_context_embedding(ranker, dataset.x_ctx)
    else:
        raise InputError(f"context_source desconhecido: {context_source!r}")
    return CalibrationSet(
        r=r,
        x_ctx=x_ctx,
        field=dataset.field,
        click=dataset.click,
        listing_id=dataset.listing_id,
    )


# ----------------------------------------------------------------------------
# export colunar do AliExpress (opcional)
# ----------------------------------------------------------------------------

DEFAULT_ALIEXPRESS_COLUMNS = {
    'listing_id': 'search_id',
    'field': 'country',
    'click': 'click',
    'ctx_prefix': 'ctx_',
    'item_prefix': 'item_',
    'ignore': 'purchase',
}


def load_aliexpress(path, countries: Optional[Sequence[str]] = None, column_map: Optional[Dict[str, str]] = None) -> Dataset:
    """
    Lê o export colunar (csv) mapeando colunas via column_map, mantém apenas os
    países pedidos e descarta listagens sem clique. Contagens ficam em dataset.meta.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"export AliExpress não encontrado: {p}")
    cmap = dict(DEFAULT_ALIEXPRESS_COLUMNS)
    cmap.update(column_map or {})
    countries = list(countries if countries is not None else Config.ALIEXPRESS_COUNTRIES)

    df = pd.read_csv(p, sep=None, engine='python')
    required = [cmap['listing_id'], cmap['field'], cmap['click']]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(f"colunas obrigatórias ausentes: {missing}")
    ignore = {c.strip() for c in cmap.get('ignore', '').split(',') if c.strip()}
    ctx_cols = [c for c in df.columns if c.startswith(cmap['ctx_prefix'])]
    item_cols = [c for c in df.columns if c.startswith(cmap['item_prefix'])]
    known = set(required) | set(ctx_cols) | set(item_cols) | ignore
    unknown = [c for c in df.columns if c not in known]
    if unknown:
        raise SchemaError(f"colunas desconhecidas: {unknown}")

    rows_in = len(df)
    df = df[df[cmap['field']].astype(str).isin(countries)]
    df = df.sort_values(cmap['listing_id'], kind='stable')
    clicks_per_listing = df.groupby(cmap['listing_id'])[cmap['click']].transform('sum')
    keep = clicks_per_listing > 0
    dropped_listings = int(df.loc[~keep, cmap['listing_id']].nunique())
    kept = df[keep]
    dropped_rows = rows_in - len(kept)
    logger.info("AliExpress: %s linhas lidas, %s mantidas, %s descartadas (%s listagens sem clique)",
                rows_in, len(kept), dropped_rows, dropped_listings)

    ds = Dataset(
        listing_id=kept[cmap['listing_id']].to_numpy(dtype=np.int64),
        field=kept[cmap['field']].astype(str).to_numpy(),
        x_ctx=kept[ctx_cols].to_numpy(dtype=np.float64).reshape(len(kept), len(ctx_cols)),
        x_item=kept[item_cols].to_numpy(dtype=np.float64).reshape(len(kept), len(item_cols)),
        click=(kept[cmap['click']].to_numpy(dtype=np.float64) > 0).astype(np.float64),
        field_name=cmap['field'],
        meta={'rows_in': rows_in, 'rows_kept': len(kept), 'rows_dropped': dropped_rows,
              'listings_dropped_no_click': dropped_listings},
    )
    return ds.validate()
