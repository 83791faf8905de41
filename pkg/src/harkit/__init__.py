"""harkit: label-efficient representation learning for wearable-sensor HAR.

Implements six training regimes over a shared minimal neural-network core:
supervised temporal-convolutional classification, unsupervised residual
autoencoding on handcrafted statistical features, weakly supervised
single-task and multi-task Siamese metric learning, self-supervised
training with temporal/feature consistency objectives, and a two-stage
weakly self-supervised hybrid.  Learned representations are evaluated by
k-means clustering with optimal cluster-to-label assignment.
"""

__version__ = "0.1.0"
