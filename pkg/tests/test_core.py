"""Tests for core interfaces, factories and errors."""

import json

import pytest
import torch

import src.backbones  # noqa: F401  registers the backbone kinds
import src.fed  # noqa: F401  registers the federated algorithms
from src.core.errors import (
    ConfigError,
    EmptyClass,
    FederatedRunError,
    FitError,
    ParseError,
    RaggedRows,
    TooFewShots,
    TrainingError,
    UncoveredClass,
)
from src.core.factories import BackboneFactory, FederatedAlgorithmFactory
from src.core.interfaces import BaseBackbone, BaseFederatedAlgorithm, PipelineStep


class TestErrors:
    """Structured error records printed by the CLI."""

    def test_base_record(self):
        record = ConfigError("bad key").to_record()
        assert record == {"error": "ConfigError", "message": "bad key"}

    def test_parse_error_position(self):
        error = ParseError("not a number", row=3, column=2)
        assert str(error) == "row 3, column 2: not a number"
        assert error.to_record()["row"] == 3
        assert error.to_record()["column"] == 2

    def test_ragged_rows_is_parse_error(self):
        error = RaggedRows("expected 3 columns", row=4)
        assert isinstance(error, ParseError)
        assert error.to_record()["error"] == "RaggedRows"
        assert error.column is None

    def test_class_errors(self):
        assert EmptyClass(2).to_record()["class_id"] == 2
        record = TooFewShots(1, 1).to_record()
        assert (record["count"], record["required"]) == (1, 2)
        assert UncoveredClass([4, 7]).to_record()["class_ids"] == [4, 7]

    def test_training_error_tagging(self):
        error = TrainingError("not positive definite", iteration=5, client_id=3)
        assert str(error).startswith("client 3, iteration 5")
        assert TrainingError("nan", iteration=0).to_record()["client_id"] is None

    def test_federated_run_error(self):
        error = FederatedRunError("round 2 failed", logs=["r0", "r1"])
        assert error.logs == ["r0", "r1"]
        assert error.to_record()["completed_rounds"] == 2

    def test_records_are_json(self):
        for error in (EmptyClass(0), UncoveredClass([1]), TrainingError("x", 1, 2)):
            assert isinstance(error, FitError)
            json.dumps(error.to_record())

    def test_value_error_compatibility(self):
        with pytest.raises(ValueError):
            raise ConfigError("also a ValueError")


class TestFactoryRegistry:
    """Tests for factory registration pattern."""

    def test_builtin_backbones(self):
        assert {"identity-with-film", "mlp-with-film"} <= set(BackboneFactory.available())

    def test_backbone_factory_register_and_create(self):
        class MockBackbone(BaseBackbone):
            def __init__(self, cfg):
                super().__init__()
                self.cfg = cfg

            def forward(self, x, psi=None):
                return x

            def film_widths(self):
                return []

            @property
            def input_dim(self):
                return 2

            @property
            def output_dim(self):
                return 2

        BackboneFactory.register("mock_backbone", MockBackbone)
        backbone = BackboneFactory.create("mock_backbone", {"input_dim": 2})

        assert isinstance(backbone, MockBackbone)
        assert backbone.cfg == {"input_dim": 2}
        assert "mock_backbone" in BackboneFactory.available()
        x = torch.ones(3, 2)
        assert torch.equal(backbone(x), x)

    def test_backbone_factory_unknown_raises(self):
        with pytest.raises(ConfigError, match="Unknown backbone"):
            BackboneFactory.create("resnet50", {})

    def test_algorithm_factory(self):
        assert FederatedAlgorithmFactory.available()[:2] == ["fedavg", "fedprox"]
        algorithm = FederatedAlgorithmFactory.create("fedprox", {"mu": 0.5})
        assert isinstance(algorithm, BaseFederatedAlgorithm)
        assert algorithm.name == "fedprox"

    def test_algorithm_factory_unknown_raises(self):
        with pytest.raises(ConfigError, match="Unknown federated algorithm"):
            FederatedAlgorithmFactory.create("scaffold", {})

    def test_algorithm_contract(self):
        class Damped(BaseFederatedAlgorithm):
            @property
            def name(self):
                return "damped"

            def proximal_step(self, values, global_values, lr):
                return 0.5 * (values + global_values)

        algorithm = Damped({})
        out = algorithm.proximal_step(torch.ones(2), torch.zeros(2), lr=0.1)
        assert torch.equal(out, torch.full((2,), 0.5))
        assert not hasattr(algorithm, "penalty")


class TestPipelineStep:
    """Tests to verify the subcommand contract."""

    def test_defaults(self):
        class EchoStep(PipelineStep):
            @property
            def name(self):
                return "echo"

            def run(self):
                return 0 if self.validate() else 1

        step = EchoStep()
        assert step.config == {}
        assert step.description == ""
        assert step.run() == 0

    def test_abstract(self):
        with pytest.raises(TypeError):
            PipelineStep()
