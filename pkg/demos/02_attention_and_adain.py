"""The fusion core: spatial/channel gates and adaptive instance normalization.

The content branch is gated per position, the reference branch per channel,
and AdaIN re-scales the gated content features so their per-channel moments
match the gated reference. This script shows the gate shapes, the zero-logit
baseline and the moment alignment numerically.
"""

import torch
import torch.nn as nn

from refsketch.attention import AttentionFusion, ChannelAttention, SpatialAttention, adain

torch.manual_seed(0)

content = torch.randn(1, 32, 24, 24)
reference = torch.randn(1, 32, 24, 24) * 2.0 + 0.5

spatial = SpatialAttention()
channel = ChannelAttention(32, reduction=16)
print(f"spatial gate: {tuple(spatial(content).shape)} (one weight per position)")
print(f"channel gate: {tuple(channel(reference).shape)} (one weight per channel)")

# With zeroed parameters every logit is 0, so every gate is sigmoid(0) = 0.5.
for p in list(spatial.parameters()) + list(channel.parameters()):
    nn.init.zeros_(p)
print(f"zero-weight gates are exactly {float(spatial(content).unique())}")

# AdaIN aligns per-channel mean and standard deviation with the reference.
out = adain(content, reference)
print("\nchannel |  content mu/sigma  ->  output mu/sigma  (reference mu/sigma)")
for c in range(3):
    c_mu, c_sd = float(content[0, c].mean()), float(content[0, c].std(unbiased=False))
    o_mu, o_sd = float(out[0, c].mean()), float(out[0, c].std(unbiased=False))
    r_mu, r_sd = float(reference[0, c].mean()), float(reference[0, c].std(unbiased=False))
    print(f"{c:7d} | {c_mu:+.3f}/{c_sd:.3f} -> {o_mu:+.3f}/{o_sd:.3f}  ({r_mu:+.3f}/{r_sd:.3f})")

# The full fused path used inside the generator:
fusion = AttentionFusion(32, reduction=16)
fused = fusion(content, reference)
print(f"\nfused features: {tuple(fused.shape)} (content spatial size, gated reference stats)")
