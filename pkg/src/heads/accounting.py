"""Shared/updateable parameter accounting and relative model update size."""

from dataclasses import dataclass

from src.backbones.spec import RESNET50_BACKBONE_PARAMS

# Methods accounted for; the last one updates the whole backbone plus a linear head.
ACCOUNTING_VARIANTS = ("qda", "lda", "protonets", "bit-linear")
REFERENCE_VARIANT = "bit-linear"


@dataclass(frozen=True)
class ParameterCount:
    variant: str
    num_classes: int
    dim: int
    shared: int
    updateable: int
    rmus: float

    def to_record(self) -> dict:
        return {
            "variant": self.variant,
            "num_classes": self.num_classes,
            "dim": self.dim,
            "shared": self.shared,
            "updateable": self.updateable,
            "rmus": self.rmus,
        }


def _check_variant(variant: str) -> str:
    variant = variant.lower()
    if variant not in ACCOUNTING_VARIANTS:
        raise ValueError(f"Unknown variant '{variant}'. Available: {list(ACCOUNTING_VARIANTS)}")
    return variant


def count_updateable(
    variant: str,
    num_classes: int,
    dim: int,
    psi_count: int,
    backbone_params: int = RESNET50_BACKBONE_PARAMS,
) -> int:
    """Updateable parameters of one downstream model.

    Args:
        variant: 'qda', 'lda', 'protonets' or 'bit-linear'.
        num_classes: C.
        dim: Embedding dimension d_b.
        psi_count: FiLM parameter count |ψ|.
        backbone_params: |θ|, only used by 'bit-linear'.

    Returns:
        QDA: ψ + C·d_b + C·d_b(d_b+1)/2 + 3
        LDA: ψ + C(d_b+1) + 2
        ProtoNets: ψ + C·d_b
        BiT-linear: |θ| + C·d_b
    """
    variant = _check_variant(variant)
    for name, value in (("num_classes", num_classes), ("dim", dim), ("psi_count", psi_count)):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")

    c, d = num_classes, dim
    if variant == "qda":
        return psi_count + c * d + c * d * (d + 1) // 2 + 3
    if variant == "lda":
        return psi_count + c * (d + 1) + 2
    if variant == "protonets":
        return psi_count + c * d
    return backbone_params + c * d


def count_shared(variant: str, backbone_params: int = RESNET50_BACKBONE_PARAMS) -> int:
    """Frozen parameters shared by every downstream model (none for full fine-tuning)."""
    return 0 if _check_variant(variant) == REFERENCE_VARIANT else backbone_params


def rmus(updateable: int, reference_updateable: int) -> float:
    """Relative model update size, updateable / reference."""
    if reference_updateable <= 0:
        raise ValueError(f"Reference count must be positive, got {reference_updateable}")
    return updateable / reference_updateable


def parameter_table(
    num_classes: int,
    dim: int,
    psi_count: int,
    backbone_params: int = RESNET50_BACKBONE_PARAMS,
    variants: tuple[str, ...] = ACCOUNTING_VARIANTS,
) -> list[ParameterCount]:
    """Shared, updateable and RMUS (against BiT-linear) for each variant."""
    reference = count_updateable(REFERENCE_VARIANT, num_classes, dim, psi_count, backbone_params)
    rows = []
    for variant in variants:
        updateable = count_updateable(variant, num_classes, dim, psi_count, backbone_params)
        rows.append(
            ParameterCount(
                variant=variant,
                num_classes=num_classes,
                dim=dim,
                shared=count_shared(variant, backbone_params),
                updateable=updateable,
                rmus=rmus(updateable, reference),
            )
        )
    return rows
