"""Tests for FiLM parameters and FiLM-adapted backbones."""

import pytest
import torch

from src.backbones import (
    RESNET50_BACKBONE_PARAMS,
    RESNET50_FILM_LAYOUT,
    BackboneSpec,
    FilmLayer,
    FilmParams,
    IdentityFilmBackbone,
    MlpFilmBackbone,
    film,
    film_magnitude_stats,
    film_param_count,
    load_backbone_spec,
    load_film,
    save_backbone_spec,
    save_film,
)
from src.core.errors import ConfigError, DimensionMismatch
from src.core.factories import BackboneFactory
from src.numerics import DTYPE


class TestFilmParams:
    """Tests for the flat FiLM vector."""

    def test_identity_layout(self):
        psi = FilmParams.identity([2, 3])
        assert psi.count == 10
        assert len(psi) == 2
        assert torch.equal(psi.values, torch.tensor([1, 1, 0, 0, 1, 1, 1, 0, 0, 0], dtype=DTYPE))
        assert psi.is_identity()

    def test_layers_are_views(self):
        psi = FilmParams.identity([2])
        psi.values.requires_grad_(True)
        layer = psi.layer(0)
        (layer.gamma * 3 + layer.beta).sum().backward()
        assert torch.equal(psi.values.grad, torch.tensor([3, 3, 1, 1], dtype=DTYPE))

    def test_from_layers_roundtrip(self):
        layers = [FilmLayer([2.0, 3.0], [0.5, -0.5]), FilmLayer([1.5], [1.0])]
        psi = FilmParams.from_layers(layers)
        assert psi.widths == (2, 1)
        assert torch.equal(psi.layer(1).gamma, torch.tensor([1.5], dtype=DTYPE))

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionMismatch):
            FilmParams([2], torch.zeros(3))

    def test_nonpositive_width_rejected(self):
        with pytest.raises(DimensionMismatch):
            FilmParams([0])

    def test_unequal_gamma_beta_rejected(self):
        with pytest.raises(DimensionMismatch):
            FilmLayer([1.0, 1.0], [0.0])

    def test_film_applies_channelwise(self):
        x = torch.tensor([[1.0, 2.0]], dtype=DTYPE)
        out = film(x, FilmLayer([2.0, -1.0], [1.0, 0.5]))
        assert torch.equal(out, torch.tensor([[3.0, -1.5]], dtype=DTYPE))

    def test_film_width_mismatch(self):
        with pytest.raises(DimensionMismatch):
            film(torch.ones(1, 3), FilmLayer.identity(2))

    def test_save_and_load(self, tmp_path):
        values = torch.linspace(-1, 1, 10, dtype=DTYPE)
        psi = FilmParams([2, 3], values)
        path = save_film(psi, tmp_path / "film.bin")
        assert path.exists()
        assert path.with_name("film.bin.json").exists()
        assert load_film(path).equal(psi)


class TestFilmStats:
    def test_identity_is_all_zero(self):
        rows = film_magnitude_stats(FilmParams.identity([4, 2]))
        assert [row["layer"] for row in rows] == [0, 1]
        assert [row["width"] for row in rows] == [4, 2]
        for row in rows:
            for key, value in row.items():
                if key.startswith(("gamma_", "beta_")):
                    assert value == 0.0

    def test_quantiles(self):
        psi = FilmParams.from_layers([FilmLayer([1.0, 2.0, 3.0], [-4.0, 0.0, 2.0])])
        (row,) = film_magnitude_stats(psi)
        assert row["gamma_min"] == 0.0
        assert row["gamma_median"] == 1.0
        assert row["gamma_max"] == 2.0
        assert row["beta_median"] == 2.0
        assert row["beta_max"] == 4.0


class TestBackboneSpec:
    """Tests for backbone descriptions and FiLM accounting."""

    def test_resnet50_reference_count(self):
        assert film_param_count(RESNET50_FILM_LAYOUT) == 11_648
        assert RESNET50_FILM_LAYOUT.backbone_params == RESNET50_BACKBONE_PARAMS == 23_500_352
        assert len(RESNET50_FILM_LAYOUT.film_widths()) == 17

    def test_identity_widths(self):
        spec = BackboneSpec(input_dim=8)
        assert spec.film_widths() == [8]
        assert spec.embedding_dim == 8
        assert film_param_count(spec) == 16

    def test_mlp_widths(self):
        spec = BackboneSpec(kind="mlp-with-film", input_dim=4, hidden_widths=(6, 5), output_dim=3)
        assert spec.film_widths() == [6, 5, 3]
        assert film_param_count(spec) == 28

    def test_mlp_without_final_film(self):
        spec = BackboneSpec(kind="mlp-with-film", input_dim=4, hidden_widths=(6,), final_film=False)
        assert spec.film_widths() == [6]

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="Unknown backbone kind"):
            BackboneSpec(kind="resnet").validate()

    def test_identity_rejects_hidden(self):
        with pytest.raises(ConfigError):
            BackboneSpec(hidden_widths=(4,)).validate()

    def test_save_and_load(self, tmp_path):
        spec = BackboneSpec(kind="mlp-with-film", input_dim=4, hidden_widths=(6,), seed=3)
        path = save_backbone_spec(spec, tmp_path / "backbone.json")
        loaded = load_backbone_spec(path)
        assert loaded.hidden_widths == (6,)
        assert loaded.seed == 3
        assert loaded.embedding_dim == 4

    def test_load_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_backbone_spec(tmp_path / "missing.json")


class TestIdentityBackbone:
    def test_registered(self):
        assert "identity-with-film" in BackboneFactory.available()
        assert isinstance(BackboneSpec(input_dim=3).build(), IdentityFilmBackbone)

    def test_identity_film_is_passthrough(self):
        backbone = BackboneSpec(input_dim=3).build()
        x = torch.randn(5, 3, dtype=DTYPE)
        psi = FilmParams.identity(backbone.film_widths())
        assert torch.equal(backbone(x, psi), x)
        assert torch.equal(backbone(x), x)

    def test_applies_film(self):
        backbone = BackboneSpec(input_dim=2).build()
        psi = FilmParams.from_layers([FilmLayer([2.0, 0.5], [1.0, -1.0])])
        out = backbone(torch.tensor([[1.0, 4.0]]), psi)
        assert torch.equal(out, torch.tensor([[3.0, 1.0]], dtype=DTYPE))

    def test_input_mismatch(self):
        backbone = BackboneSpec(input_dim=3).build()
        with pytest.raises(DimensionMismatch):
            backbone(torch.ones(2, 4))

    def test_film_layout_mismatch(self):
        backbone = BackboneSpec(input_dim=3).build()
        with pytest.raises(DimensionMismatch):
            backbone(torch.ones(2, 3), FilmParams.identity([2]))


class TestMlpBackbone:
    """Tests for the frozen random MLP."""

    def spec(self, **kwargs) -> BackboneSpec:
        base = {"kind": "mlp-with-film", "input_dim": 4, "hidden_widths": (8, 6), "output_dim": 5}
        return BackboneSpec(**{**base, **kwargs})

    def test_output_shape(self):
        backbone = self.spec().build()
        assert isinstance(backbone, MlpFilmBackbone)
        out = backbone(torch.randn(7, 4, dtype=DTYPE), FilmParams.identity(backbone.film_widths()))
        assert out.shape == (7, 5)

    def test_seed_reproduces_weights(self):
        x = torch.randn(3, 4, dtype=DTYPE)
        a = self.spec(seed=11).build()(x)
        b = self.spec(seed=11).build()(x)
        c = self.spec(seed=12).build()(x)
        assert torch.equal(a, b)
        assert not torch.equal(a, c)

    def test_identity_film_equals_no_film(self):
        backbone = self.spec().build()
        x = torch.randn(3, 4, dtype=DTYPE)
        psi = FilmParams.identity(backbone.film_widths())
        assert torch.allclose(backbone(x, psi), backbone(x))

    def test_frozen_weights_are_buffers(self):
        backbone = self.spec().build()
        assert list(backbone.parameters()) == []
        assert len(list(backbone.buffers())) == 6

    def test_gradient_reaches_every_film_layer(self):
        backbone = self.spec().build()
        psi = FilmParams.identity(backbone.film_widths())
        psi.values.requires_grad_(True)
        backbone(torch.randn(10, 4, dtype=DTYPE), psi).pow(2).sum().backward()
        for gamma_at, beta_at, width in psi.offsets():
            assert psi.values.grad[gamma_at:beta_at + width].abs().sum() > 0
