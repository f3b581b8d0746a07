"""Server-side reductions: FiLM averaging and global prototype tables."""

import logging
from typing import Mapping, Sequence

import torch

from src.backbones.film import FilmParams
from src.backbones.spec import BackboneSpec
from src.core.errors import DimensionMismatch, UncoveredClass
from src.core.interfaces import BaseBackbone
from src.heads.naive_bayes import ClassifierCache
from src.heads.statistics import HeadVariant
from src.numerics import DTYPE

from .client import ClientState

logger = logging.getLogger(__name__)


def aggregate_films(updates: Mapping[int, FilmParams] | Sequence[FilmParams]) -> FilmParams:
    """Elementwise mean of client ψ vectors.

    A mapping is reduced in ascending client-id order, a sequence in its own
    order, so a fixed set of updates always gives the same bits.

    Raises:
        DimensionMismatch: If the updates have different FiLM layouts.
    """
    if isinstance(updates, Mapping):
        ordered = [updates[cid] for cid in sorted(updates)]
    else:
        ordered = list(updates)
    if not ordered:
        raise ValueError("No client updates to aggregate")

    widths = ordered[0].widths
    total = torch.zeros(ordered[0].count, dtype=DTYPE)
    for psi in ordered:
        if psi.widths != widths:
            raise DimensionMismatch(
                f"FiLM layout {list(psi.widths)} does not match {list(widths)}"
            )
        total = total + psi.values.detach()
    return FilmParams(widths, total / len(ordered))


def build_global_prototypes(
    clients: Sequence[ClientState],
    global_psi: FilmParams,
    backbone: BaseBackbone | BackboneSpec,
    classes: Sequence[int] | None = None,
    weighted: bool = False,
) -> ClassifierCache:
    """ProtoNets cache whose class means average the clients' prototypes.

    Only prototype vectors leave the clients. A class owned by several
    clients gets the plain mean of their prototypes, or the mean weighted by
    each client's example count when `weighted` is set.

    Args:
        classes: Classes the cache must cover (default: every owned class).

    Raises:
        UncoveredClass: If a requested class is owned by no client.
    """
    contributions: dict[int, list[tuple[torch.Tensor, int]]] = {}
    for client in sorted(clients, key=lambda c: c.client_id):
        table = client.refresh_prototypes(backbone, global_psi)
        counts = client.data.class_counts()
        for row, c in enumerate(table.classes):
            contributions.setdefault(c, []).append((table.means[row], int(counts[c])))

    wanted = sorted(contributions) if classes is None else [int(c) for c in classes]
    uncovered = [c for c in wanted if c not in contributions]
    if uncovered:
        raise UncoveredClass(uncovered)

    means = []
    totals = []
    for c in wanted:
        parts = contributions[c]
        if weighted:
            count = sum(n for _, n in parts)
            mean = sum((p * n for p, n in parts), torch.zeros_like(parts[0][0])) / count
        else:
            mean = sum((p for p, _ in parts), torch.zeros_like(parts[0][0])) / len(parts)
        means.append(mean)
        totals.append(sum(n for _, n in parts))

    counts = torch.as_tensor(totals, dtype=DTYPE)
    return ClassifierCache(
        variant=HeadVariant.PROTONETS,
        means=torch.stack(means),
        log_priors=torch.log(counts / counts.sum()),
        classes=tuple(wanted),
    )
