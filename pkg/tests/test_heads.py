"""Tests for the Naive Bayes head, the linear head and parameter accounting."""

import math

import pytest
import torch
from torch.distributions import MultivariateNormal

from src.core.errors import ConfigError, DimensionMismatch, EmptyClass, NotPositiveDefinite
from src.heads import (
    CovarianceWeights,
    HeadVariant,
    LinearHead,
    build_cache,
    class_logits,
    count_shared,
    count_updateable,
    estimate_stats,
    head_parameter_count,
    linear_forward,
    linear_loss,
    load_cache,
    load_covariance_weights,
    load_linear_head,
    mix_covariance,
    parameter_table,
    predict_labels,
    predict_log_joint,
    predict_log_probs,
    restrict_cache,
    rmus,
    save_cache,
    save_covariance_weights,
    save_linear_head,
)
from src.numerics import DTYPE


def gaussian_task(num_classes=3, dim=4, shots=6, seed=0):
    generator = torch.Generator().manual_seed(seed)
    centers = 3.0 * torch.randn(num_classes, dim, generator=generator, dtype=DTYPE)
    labels = torch.arange(num_classes).repeat_interleave(shots)
    noise = torch.randn(labels.shape[0], dim, generator=generator, dtype=DTYPE)
    return centers[labels] + noise, labels


class TestHeadVariant:
    def test_parse(self):
        assert HeadVariant.parse("LDA") is HeadVariant.LDA
        assert HeadVariant.parse(HeadVariant.QDA) is HeadVariant.QDA

    def test_unknown(self):
        with pytest.raises(ConfigError, match="Unknown head variant"):
            HeadVariant.parse("svm")

    def test_num_weights(self):
        assert HeadVariant.QDA.num_weights == 3
        assert HeadVariant.LDA.num_weights == 2
        assert HeadVariant.PROTONETS.num_weights == 0


class TestEstimateStats:
    """Tests for maximum-likelihood statistics."""

    def test_known_values(self):
        x = torch.tensor([[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]], dtype=DTYPE)
        labels = torch.tensor([0, 0, 1])
        stats = estimate_stats(x, labels, 2)

        assert torch.allclose(stats.priors, torch.tensor([2 / 3, 1 / 3], dtype=DTYPE))
        assert torch.allclose(stats.means, torch.tensor([[1.0, 0.0], [0.0, 4.0]], dtype=DTYPE))
        # biased 1/N estimator
        assert torch.allclose(
            stats.class_covariances[0], torch.tensor([[1.0, 0.0], [0.0, 0.0]], dtype=DTYPE)
        )
        assert torch.equal(stats.class_covariances[1], torch.zeros(2, 2, dtype=DTYPE))
        centered = x - x.mean(dim=0)
        assert torch.allclose(stats.task_covariance, centered.T @ centered / 3)
        assert stats.counts.tolist() == [2, 1]
        assert stats.total == 3

    def test_empty_class(self):
        with pytest.raises(EmptyClass) as excinfo:
            estimate_stats(torch.ones(2, 2), torch.tensor([0, 2]), 3)
        assert excinfo.value.class_id == 1

    def test_label_out_of_range(self):
        with pytest.raises(DimensionMismatch):
            estimate_stats(torch.ones(2, 2), torch.tensor([0, 5]), 2)

    def test_label_count_mismatch(self):
        with pytest.raises(DimensionMismatch):
            estimate_stats(torch.ones(3, 2), torch.tensor([0, 1]), 2)


class TestCovarianceWeights:
    def test_initial(self):
        assert CovarianceWeights.initial().as_tuple() == pytest.approx((0.5, 0.5, 1.0))

    def test_zero_weight_roundtrips_exactly(self):
        weights = CovarianceWeights.from_values(0.0, 1.0, 1.0)
        assert weights.values[0].item() == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            CovarianceWeights.from_values(-1.0, 1.0, 1.0)

    def test_mix(self):
        x, labels = gaussian_task()
        stats = estimate_stats(x, labels, 3)
        weights = CovarianceWeights.from_values(0.2, 0.3, 2.0)
        eye = torch.eye(4, dtype=DTYPE)
        lda = mix_covariance(stats, weights, "lda")
        qda = mix_covariance(stats, weights, "qda")
        assert torch.allclose(lda, 0.3 * stats.task_covariance + 2.0 * eye)
        assert torch.allclose(qda[1], 0.2 * stats.class_covariances[1] + lda)
        assert mix_covariance(stats, weights, "protonets") is None

    def test_save_and_load(self, tmp_path):
        weights = CovarianceWeights.from_values(0.1, 0.7, 1.3)
        path = save_covariance_weights(weights, tmp_path / "weights.bin")
        assert load_covariance_weights(path).equal(weights)


class TestClassifierCache:
    """Prediction checked against direct Gaussian densities."""

    def test_qda_matches_gaussian_density(self):
        x, labels = gaussian_task()
        stats = estimate_stats(x, labels, 3)
        weights = CovarianceWeights.initial()
        cache = build_cache(stats, weights, "qda")
        sigma = mix_covariance(stats, weights, "qda")

        points = torch.randn(5, 4, dtype=DTYPE)
        expected = torch.stack(
            [
                MultivariateNormal(stats.means[c], sigma[c]).log_prob(points)
                + torch.log(stats.priors[c])
                for c in range(3)
            ],
            dim=-1,
        )
        assert torch.allclose(predict_log_joint(points, cache), expected, atol=1e-9)
        assert torch.allclose(
            predict_log_probs(points, cache), torch.log_softmax(expected, dim=-1), atol=1e-9
        )

    def test_full_lda_matches_gaussian_density(self):
        x, labels = gaussian_task(seed=1)
        stats = estimate_stats(x, labels, 3)
        weights = CovarianceWeights.initial()
        cache = build_cache(stats, weights, "lda", compact_lda=False)
        sigma = mix_covariance(stats, weights, "lda")

        points = torch.randn(4, 4, dtype=DTYPE)
        expected = torch.stack(
            [
                MultivariateNormal(stats.means[c], sigma).log_prob(points)
                + torch.log(stats.priors[c])
                for c in range(3)
            ],
            dim=-1,
        )
        assert torch.allclose(predict_log_joint(points, cache), expected, atol=1e-9)

    def test_compact_lda_equals_full_lda(self):
        x, labels = gaussian_task(seed=2)
        stats = estimate_stats(x, labels, 3)
        weights = CovarianceWeights.from_values(0.5, 0.8, 0.4)
        compact = build_cache(stats, weights, "lda")
        full = build_cache(stats, weights, "lda", compact_lda=False)
        assert compact.compact and not full.compact

        points = torch.randn(10, 4, dtype=DTYPE)
        assert torch.allclose(
            predict_log_probs(points, compact), predict_log_probs(points, full), atol=1e-10
        )
        assert torch.equal(predict_labels(points, compact), predict_labels(points, full))

    def test_protonets_logits(self):
        x = torch.tensor([[0.0, 0.0], [0.0, 2.0], [4.0, 0.0]], dtype=DTYPE)
        stats = estimate_stats(x, torch.tensor([0, 0, 1]), 2)
        cache = build_cache(stats, None, "protonets")
        logits = class_logits(torch.tensor([[0.0, 1.0]], dtype=DTYPE), cache)
        assert torch.allclose(logits, torch.tensor([[0.0, -17.0]], dtype=DTYPE))

    def test_protonets_prior(self):
        x = torch.tensor([[0.0], [0.0], [1.0]], dtype=DTYPE)
        stats = estimate_stats(x, torch.tensor([0, 0, 1]), 2)
        plain = build_cache(stats, None, "protonets")
        with_prior = build_cache(stats, None, "protonets", use_prior=True)
        point = torch.tensor([[0.5]], dtype=DTYPE)
        delta = class_logits(point, with_prior) - class_logits(point, plain)
        assert torch.allclose(delta, torch.log(stats.priors).unsqueeze(0))

    def test_single_embedding(self):
        x, labels = gaussian_task()
        cache = build_cache(estimate_stats(x, labels, 3), CovarianceWeights.initial(), "lda")
        log_probs = predict_log_probs(x[0], cache)
        assert log_probs.shape == (3,)
        assert torch.logsumexp(log_probs, dim=0).item() == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_covariance(self):
        x, labels = gaussian_task()
        stats = estimate_stats(torch.zeros_like(x), labels, 3)
        weights = CovarianceWeights.from_values(1.0, 1.0, 0.0)
        with pytest.raises(NotPositiveDefinite):
            build_cache(stats, weights, "qda")

    def test_missing_weights(self):
        x, labels = gaussian_task()
        with pytest.raises(ValueError):
            build_cache(estimate_stats(x, labels, 3), None, "lda")

    def test_class_labels_follow_rows(self):
        x, labels = gaussian_task()
        stats = estimate_stats(x, labels, 3)
        cache = build_cache(stats, None, "protonets", classes=[7, 3, 9])
        assert predict_labels(stats.means, cache).tolist() == [7, 3, 9]

    def test_restrict_renormalizes_priors(self):
        x, labels = gaussian_task()
        stats = estimate_stats(x, labels, 3)
        cache = build_cache(stats, CovarianceWeights.initial(), "qda", classes=[4, 5, 6])
        restricted = restrict_cache(cache, [6, 4])
        assert restricted.classes == (6, 4)
        assert restricted.num_classes == 2
        assert torch.exp(restricted.log_priors).sum().item() == pytest.approx(1.0)
        assert torch.equal(restricted.means, cache.means[[2, 0]])

    def test_restrict_unknown_class(self):
        x, labels = gaussian_task()
        cache = build_cache(estimate_stats(x, labels, 3), None, "protonets")
        with pytest.raises(DimensionMismatch):
            restrict_cache(cache, [0, 8])

    def test_dimension_mismatch(self):
        x, labels = gaussian_task()
        cache = build_cache(estimate_stats(x, labels, 3), None, "protonets")
        with pytest.raises(DimensionMismatch):
            class_logits(torch.ones(1, 5), cache)

    @pytest.mark.parametrize("variant,compact", [("qda", False), ("lda", True), ("lda", False)])
    def test_save_and_load(self, tmp_path, variant, compact):
        x, labels = gaussian_task()
        stats = estimate_stats(x, labels, 3)
        cache = build_cache(
            stats, CovarianceWeights.initial(), variant, compact_lda=compact, classes=[1, 2, 5]
        )
        loaded = load_cache(save_cache(cache, tmp_path / "cache.bin"))
        assert loaded.variant is cache.variant
        assert loaded.classes == (1, 2, 5)
        assert loaded.compact == cache.compact
        points = torch.randn(3, 4, dtype=DTYPE)
        assert torch.allclose(predict_log_probs(points, loaded), predict_log_probs(points, cache))

    def test_head_parameter_count(self):
        x, labels = gaussian_task()
        stats = estimate_stats(x, labels, 3)
        weights = CovarianceWeights.initial()
        assert head_parameter_count(build_cache(stats, weights, "lda")) == 3 * 5
        assert head_parameter_count(build_cache(stats, weights, "qda")) == 3 * 4 + 3 * 10
        assert head_parameter_count(build_cache(stats, None, "protonets")) == 12


class TestHeadInvariants:
    """Relations between the head variants and a brute-force density oracle."""

    def test_one_dimensional_posterior(self):
        x = torch.tensor([[0.0], [2.0]], dtype=DTYPE)
        stats = estimate_stats(x, torch.tensor([0, 1]), 2)
        # task covariance of {0, 2} is exactly 1
        cache = build_cache(stats, CovarianceWeights.from_values(0.0, 1.0, 0.0), "lda")

        midpoint = torch.exp(predict_log_probs(torch.tensor([[1.0]], dtype=DTYPE), cache))
        assert midpoint[0].tolist() == pytest.approx([0.5, 0.5], abs=1e-12)

        at_zero = torch.exp(predict_log_probs(torch.tensor([[0.0]], dtype=DTYPE), cache))
        expected = math.e**2 / (1 + math.e**2)
        assert at_zero[0, 0].item() == pytest.approx(expected, abs=1e-12)
        assert at_zero[0, 0].item() == pytest.approx(0.88080, abs=1e-5)

    @pytest.mark.parametrize("seed", range(5))
    def test_qda_without_class_term_equals_lda(self, seed):
        x, labels = gaussian_task(num_classes=4, dim=5, shots=7, seed=seed)
        stats = estimate_stats(x, labels, 4)
        qda = build_cache(stats, CovarianceWeights.from_values(0.0, 0.7, 1.3), "qda")
        lda = build_cache(stats, CovarianceWeights.from_values(0.9, 0.7, 1.3), "lda")

        points = 3.0 * torch.randn(12, 5, dtype=DTYPE)
        assert torch.allclose(
            predict_log_probs(points, qda), predict_log_probs(points, lda), rtol=0, atol=1e-10
        )

    @pytest.mark.parametrize("seed", range(5))
    def test_identity_lda_argmax_matches_protonets(self, seed):
        x, labels = gaussian_task(num_classes=5, dim=3, shots=4, seed=seed)
        stats = estimate_stats(x, labels, 5)
        lda = build_cache(stats, CovarianceWeights.from_values(1.0, 0.0, 1.0), "lda")
        protonets = build_cache(stats, None, "protonets")

        points = 4.0 * torch.randn(50, 3, dtype=DTYPE)
        assert torch.equal(predict_labels(points, lda), predict_labels(points, protonets))
        # -d²/2 against -d²: same ranking up to a per-point constant
        lda_logits = predict_log_probs(points, lda)
        halved = torch.log_softmax(class_logits(points, protonets) / 2, dim=-1)
        assert torch.allclose(lda_logits, halved, rtol=0, atol=1e-10)

    def test_shrinkage_approaches_isotropic_rule(self):
        x, labels = gaussian_task(num_classes=3, dim=4, shots=5, seed=3)
        stats = estimate_stats(x, labels, 3)
        points = 3.0 * torch.randn(20, 4, dtype=DTYPE)

        gaps = []
        for e3 in (1e2, 1e4, 1e6):
            qda = build_cache(stats, CovarianceWeights.from_values(0.5, 0.5, e3), "qda")
            isotropic = build_cache(stats, CovarianceWeights.from_values(0.0, 0.0, e3), "lda")
            difference = predict_log_probs(points, qda) - predict_log_probs(points, isotropic)
            gaps.append(difference.abs().max().item())

        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-4

    def test_randomized_density_oracle(self):
        generator = torch.Generator().manual_seed(11)

        def draw(low, high):
            return int(torch.randint(low, high + 1, (1,), generator=generator))

        for _ in range(100):
            num_classes, dim, shots = draw(2, 5), draw(1, 8), draw(1, 6)
            centers = 2.0 * torch.randn(num_classes, dim, generator=generator, dtype=DTYPE)
            labels = torch.arange(num_classes).repeat_interleave(shots)
            noise = torch.randn(labels.shape[0], dim, generator=generator, dtype=DTYPE)
            stats = estimate_stats(centers[labels] + noise, labels, num_classes)
            e1, e2, e3 = (0.1 + torch.rand(3, generator=generator, dtype=DTYPE)).tolist()
            weights = CovarianceWeights.from_values(e1, e2, e3)
            points = 2.0 * torch.randn(6, dim, generator=generator, dtype=DTYPE)

            for variant in ("qda", "lda"):
                cache = build_cache(stats, weights, variant, compact_lda=False)
                sigma = mix_covariance(stats, weights, variant)
                expected = torch.stack(
                    [
                        MultivariateNormal(
                            stats.means[c], sigma[c] if variant == "qda" else sigma
                        ).log_prob(points)
                        + torch.log(stats.priors[c])
                        for c in range(num_classes)
                    ],
                    dim=-1,
                )
                assert torch.allclose(
                    predict_log_joint(points, cache), expected, rtol=0, atol=1e-9
                )


class TestLinearHead:
    def test_zero_head_loss_is_log_c(self):
        head = LinearHead.zeros(4, 3)
        loss = linear_loss(head, torch.randn(6, 3, dtype=DTYPE), torch.tensor([0, 1, 2, 3, 0, 1]))
        assert loss.item() == pytest.approx(math.log(4))

    def test_forward(self):
        head = LinearHead(torch.tensor([[1.0, 0.0], [0.0, 2.0]]), torch.tensor([0.5, -1.0]))
        out = linear_forward(head, torch.tensor([3.0, 4.0]))
        assert torch.equal(out, torch.tensor([3.5, 7.0], dtype=DTYPE))

    def test_single_example_loss(self):
        head = LinearHead.zeros(2, 2)
        assert linear_loss(head, torch.ones(2), 1).item() == pytest.approx(math.log(2))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            LinearHead(torch.tensor([[float("nan")]]), torch.zeros(1))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            LinearHead(torch.zeros(2, 3), torch.zeros(3))

    def test_save_and_load(self, tmp_path):
        head = LinearHead(torch.randn(3, 2, dtype=DTYPE), torch.randn(3, dtype=DTYPE))
        loaded = load_linear_head(save_linear_head(head, tmp_path / "linear.bin"))
        assert torch.equal(loaded.weight, head.weight)
        assert torch.equal(loaded.bias, head.bias)


class TestAccounting:
    """Shared/updateable counts for a ResNet-50 sized backbone."""

    PSI = 11_648
    DIM = 2048

    def test_ten_classes(self):
        assert count_updateable("lda", 10, self.DIM, self.PSI) == 32_140
        assert count_updateable("protonets", 10, self.DIM, self.PSI) == 32_128
        assert count_updateable("qda", 10, self.DIM, self.PSI) == 21_013_891
        assert count_updateable("bit-linear", 10, self.DIM, self.PSI) == 23_520_832

    def test_hundred_classes(self):
        lda = count_updateable("lda", 100, self.DIM, self.PSI)
        qda = count_updateable("qda", 100, self.DIM, self.PSI)
        bit = count_updateable("bit-linear", 100, self.DIM, self.PSI)
        assert (lda, qda, bit) == (216_550, 210_034_051, 23_705_152)
        assert rmus(lda, bit) == pytest.approx(0.0091, abs=5e-5)
        assert rmus(qda, bit) == pytest.approx(8.860, abs=5e-4)

    def test_shared(self):
        assert count_shared("lda") == 23_500_352
        assert count_shared("bit-linear") == 0

    def test_table(self):
        rows = parameter_table(10, self.DIM, self.PSI)
        assert [row.variant for row in rows] == ["qda", "lda", "protonets", "bit-linear"]
        assert rows[-1].rmus == 1.0
        assert rows[1].to_record()["updateable"] == 32_140

    def test_invalid(self):
        with pytest.raises(ValueError, match="Unknown variant"):
            count_updateable("svm", 10, self.DIM, self.PSI)
        with pytest.raises(ValueError):
            count_updateable("lda", 0, self.DIM, self.PSI)
        with pytest.raises(ValueError):
            rmus(1, 0)
