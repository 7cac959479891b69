"""Quantized-sigmoid bridge between R^320 and (query, plan) token strings.

Coordinates 0..255 carry the query tokens and 256..319 the plan tokens.
Each coordinate maps to ``floor(sigmoid(z) * 64)``; encoding places a
token at the logit of its bucket center, so decode(encode(x)) == x.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, logit

from headroom import plan_codec, query_codec
from headroom.catalog import Catalog

QUERY_DIM = query_codec.QUERY_LENGTH
PLAN_DIM = plan_codec.PLAN_LENGTH
LATENT_DIM = QUERY_DIM + PLAN_DIM
VOCAB = 64
BOX = 5.0


def to_tokens(z) -> np.ndarray:
    """Quantize latent coordinates (any shape) to integer tokens in [0, 63]."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("latent vector has non-finite coordinates")
    return np.clip(np.floor(expit(z) * VOCAB), 0, VOCAB - 1).astype(np.int64)


def from_tokens(tokens) -> np.ndarray:
    """Bucket-center latent coordinates for integer tokens."""
    t = np.asarray(tokens, dtype=np.float64)
    return logit((t + 0.5) / VOCAB)


def live_dims(n_tables: int) -> np.ndarray:
    """Mask of the coordinates a decoder can read for a catalog of ``n_tables`` tables.

    The query decoder reads the start table, the join count, at most
    ``n_tables - 1`` growth slots and the predicate slots; the plan decoder
    reads one token per join.
    """
    mask = np.zeros(LATENT_DIM, dtype=bool)
    grow = min(max(n_tables - 1, 0), query_codec.GROWTH_SLOTS)
    mask[:query_codec.GROWTH_START + grow] = True
    mask[query_codec.PRED_START:query_codec.PRED_START + 3 * query_codec.PRED_SLOTS] = True
    mask[QUERY_DIM:QUERY_DIM + max(n_tables - 1, 0)] = True
    return mask


def split_tokens(z) -> tuple[list[int], list[int]]:
    tok = to_tokens(z)
    if tok.shape != (LATENT_DIM,):
        raise ValueError(f"latent vector must have {LATENT_DIM} coordinates")
    return tok[:QUERY_DIM].tolist(), tok[QUERY_DIM:].tolist()


def decode_tokens(query_tokens, plan_tokens, catalog: Catalog):
    q = query_codec.decode_query(query_tokens, catalog)
    return q, plan_codec.decode_plan(plan_tokens, q)


def decode_latent(z, catalog: Catalog):
    """Decode ``z`` into an executable ``(query, plan)`` pair. Never fails on finite input."""
    qt, pt = split_tokens(z)
    return decode_tokens(qt, pt, catalog)


def encode_pair(q, p, catalog: Catalog) -> np.ndarray:
    tokens = query_codec.encode_query(q, catalog) + plan_codec.encode_plan(p, q)
    return from_tokens(tokens)
