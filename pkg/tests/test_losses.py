"""Loss terms, the weight schedule and the frozen-backbone guarantees."""

import math

import pytest
import torch
import torch.nn as nn

from helpers import assert_grad_matches

from refsketch.errors import (
    EncoderNotFrozen,
    NonFiniteTerm,
    OutOfRangeEpoch,
    ShapeMismatch,
)
from refsketch.extractors import identity_extractor, vgg16_extractor
from refsketch.losses import (
    LossWeights,
    adversarial_losses,
    cycle_loss,
    line_loss,
    loss_weights,
    style_loss,
    total_generator_loss,
)
from refsketch.networks import StyleEncoder


class MeanEmbedder(nn.Module):
    """Stub encoder: embeds an image as 128 copies of its mean value."""

    def forward(self, images):
        return images.mean(dim=(-1, -2, -3), keepdim=False).reshape(-1, 1).expand(-1, 128)


def frozen(module):
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)
    return module


class ConstantDiscriminator(nn.Module):
    def __init__(self, logit):
        super().__init__()
        self.logit = logit

    def forward(self, x):
        return torch.full((x.shape[0], 1, 4, 4), self.logit) + 0.0 * x.sum()


class TestStyleLoss:
    def test_identical_images_zero(self):
        enc = frozen(MeanEmbedder())
        img = torch.rand(2, 1, 16, 16) * 2 - 1
        assert float(style_loss(img, img.clone(), enc)) == 0.0

    def test_hand_embeddings(self):
        # embeddings 128 x [0.5] vs 128 x [0.25]: mean |diff| = 0.25
        enc = frozen(MeanEmbedder())
        out = torch.full((1, 1, 8, 8), 0.5)
        ref = torch.full((1, 1, 8, 8), 0.25)
        assert math.isclose(float(style_loss(out, ref, enc)), 0.25, rel_tol=1e-6)

    def test_symmetric_value(self):
        enc = frozen(StyleEncoder(base_channels=8))
        a = torch.rand(1, 1, 16, 16) * 2 - 1
        b = torch.rand(1, 1, 16, 16) * 2 - 1
        assert math.isclose(float(style_loss(a, b, enc)), float(style_loss(b, a, enc)),
                            rel_tol=1e-6)

    def test_training_mode_encoder_rejected(self):
        enc = StyleEncoder(base_channels=8)
        enc.train()
        with pytest.raises(EncoderNotFrozen):
            style_loss(torch.zeros(1, 1, 16, 16), torch.zeros(1, 1, 16, 16), enc)

    def test_no_gradient_into_encoder(self):
        enc = StyleEncoder(base_channels=8)
        enc.eval()
        for p in enc.parameters():
            p.requires_grad_(False)
        out = (torch.rand(1, 1, 16, 16) * 2 - 1).requires_grad_(True)
        style_loss(out, torch.rand(1, 1, 16, 16) * 2 - 1, enc).backward()
        assert out.grad is not None
        assert all(p.grad is None for p in enc.parameters())


class TestLineLoss:
    def test_identical_zero(self):
        hed, vgg = identity_extractor("hed"), identity_extractor("vgg")
        img = torch.rand(1, 3, 8, 8) * 2 - 1
        assert float(line_loss(img, img.clone(), hed, vgg)) == 0.0

    def test_stub_hand_value(self):
        # hed = identity, single identity tap: images [1, 1] vs [0, 1] -> 0.5
        hed, vgg = identity_extractor("hed"), identity_extractor("vgg")
        a = torch.tensor([1.0, 1.0]).view(1, 1, 1, 2)
        b = torch.tensor([0.0, 1.0]).view(1, 1, 1, 2)
        assert math.isclose(float(line_loss(a, b, hed, vgg)), 0.5, rel_tol=1e-7)

    def test_nonnegative(self):
        hed, vgg = identity_extractor("hed"), identity_extractor("vgg")
        for _ in range(10):
            a = torch.rand(1, 3, 8, 8) * 2 - 1
            b = torch.rand(1, 3, 8, 8) * 2 - 1
            assert float(line_loss(a, b, hed, vgg)) >= 0.0

    def test_shape_mismatch(self):
        hed, vgg = identity_extractor("hed"), identity_extractor("vgg")
        with pytest.raises(ShapeMismatch):
            line_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 4, 4), hed, vgg)


class TestCycleLoss:
    def test_examples(self):
        img = torch.rand(1, 3, 8, 8) * 2 - 1
        assert float(cycle_loss(img, img.clone())) == 0.0
        ones = torch.ones(1, 3, 4, 4)
        assert float(cycle_loss(ones, -ones)) == 2.0
        a = torch.zeros(1, 1, 2, 2)
        b = torch.zeros(1, 1, 2, 2)
        b[0, 0, 0] = 1.0  # half the pixels differ by 1.0
        assert float(cycle_loss(a, b)) == 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            cycle_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 1, 8, 8))


class TestAdversarialLosses:
    def test_zero_logits(self):
        d = ConstantDiscriminator(0.0)
        real = torch.rand(2, 1, 8, 8)
        fake = torch.rand(2, 1, 8, 8)
        d_loss, g_loss = adversarial_losses(d, real, fake)
        assert math.isclose(float(d_loss), 2.0 * math.log(2.0), rel_tol=1e-6)
        assert math.isclose(float(g_loss), math.log(2.0), rel_tol=1e-6)

    def test_perfect_discriminator(self):
        class PerfectD(nn.Module):
            def forward(self, x):
                logit = 50.0 if float(x.mean()) > 0 else -50.0
                return torch.full((x.shape[0], 1, 4, 4), logit) + 0.0 * x.sum()

        real = torch.full((1, 1, 8, 8), 1.0)
        fake = torch.full((1, 1, 8, 8), -1.0)
        d_loss, _ = adversarial_losses(PerfectD(), real, fake)
        assert float(d_loss) < 1e-6

    def test_g_loss_monotone_in_logits(self):
        fake = torch.rand(1, 1, 8, 8)
        values = [
            float(adversarial_losses(ConstantDiscriminator(logit), fake, fake)[1])
            for logit in (-2.0, 0.0, 2.0, 5.0)
        ]
        assert values == sorted(values, reverse=True)

    def test_saturating_flag(self):
        d = ConstantDiscriminator(0.0)
        fake = torch.rand(1, 1, 8, 8)
        _, g_sat = adversarial_losses(d, fake, fake, saturating=True)
        assert math.isclose(float(g_sat), -math.log(2.0), rel_tol=1e-6)


class TestWeightSchedule:
    def test_published_endpoints(self):
        w = loss_weights(0, 100)
        assert (w.style, w.line, w.cyc, w.adv) == (5.0, 5.0, 10.0, 1.0)
        assert loss_weights(100, 100).style == 0.5
        assert loss_weights(50, 100).style == 2.75

    def test_affine_in_epoch(self):
        total = 200
        values = [loss_weights(e, total).style for e in range(total + 1)]
        deltas = {round(b - a, 12) for a, b in zip(values, values[1:])}
        assert len(deltas) == 1
        assert values[-1] == 0.5

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeEpoch):
            loss_weights(-1, 100)
        with pytest.raises(OutOfRangeEpoch):
            loss_weights(101, 100)
        with pytest.raises(OutOfRangeEpoch):
            loss_weights(0, 0)

    def test_weight_invariants(self):
        with pytest.raises(ValueError):
            LossWeights(style=1.0, line=2.0)
        with pytest.raises(ValueError):
            LossWeights(style=6.0, line=6.0)
        with pytest.raises(ValueError):
            LossWeights(style=1.0, line=1.0, cyc=5.0)


class TestTotalLoss:
    def test_weighted_sums(self):
        assert total_generator_loss(0.0, 0.0, 0.0, 0.0, loss_weights(0, 100)) == 0.0
        # 5 + 5 + 10 + 1 and 0.5 + 0.5 + 10 + 1, by hand
        assert total_generator_loss(1.0, 1.0, 1.0, 1.0, loss_weights(0, 100)) == 21.0
        assert total_generator_loss(1.0, 1.0, 1.0, 1.0, loss_weights(100, 100)) == 12.0

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteTerm):
            total_generator_loss(float("nan"), 0.0, 0.0, 0.0, loss_weights(0, 100))
        with pytest.raises(NonFiniteTerm):
            total_generator_loss(0.0, float("inf"), 0.0, 0.0, loss_weights(0, 100))


class TestFrozenBackbones:
    def test_backbone_weights_survive_backward(self):
        torch.manual_seed(0)
        vgg = vgg16_extractor(None, taps=(1, 3))
        hed = identity_extractor("hed")
        encoder = frozen(StyleEncoder(base_channels=8))
        vgg_before = vgg.state_snapshot()
        enc_before = [p.detach().clone() for p in encoder.parameters()]
        for _ in range(3):
            out = (torch.rand(1, 1, 32, 32) * 2 - 1).requires_grad_(True)
            color = torch.rand(1, 3, 32, 32) * 2 - 1
            recon = (torch.rand(1, 3, 32, 32) * 2 - 1).requires_grad_(True)
            style_loss(out, torch.rand(1, 1, 32, 32) * 2 - 1, encoder).backward()
            line_loss(color, recon, hed, vgg).backward()
        for before, after in zip(vgg_before, vgg.state_snapshot()):
            assert torch.equal(before, after)
        for before, after in zip(enc_before, encoder.parameters()):
            assert torch.equal(before, after)


class TestGradients:
    def test_style_loss_gradient(self):
        torch.manual_seed(1)
        enc = frozen(StyleEncoder(base_channels=8).double())
        ref = torch.rand(1, 1, 8, 8, dtype=torch.float64) * 2 - 1
        x = torch.rand(1, 1, 8, 8, dtype=torch.float64) * 2 - 1
        assert_grad_matches(lambda t: style_loss(t, ref, enc), x)

    def test_line_loss_gradient(self):
        torch.manual_seed(2)
        hed, vgg = identity_extractor("hed"), identity_extractor("vgg")
        color = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1
        x = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1
        assert_grad_matches(lambda t: line_loss(color, t, hed, vgg), x)

    def test_cycle_loss_gradient(self):
        torch.manual_seed(3)
        color = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1
        x = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1
        assert_grad_matches(lambda t: cycle_loss(color, t), x)
