"""Learning the projection jointly vs fixing it up front.

The two spirals are embedded in a random 2-d subspace of a 10-d space with
mild isotropic noise.  Three routes to a classifier:

  filter: project to 2-d by variance (PCA), then fit a linear classifier.
          The projection recovers the right plane, but no linear view of a
          spiral pair is linearly separable, so the classifier is stuck.
  1-NN:   nearest neighbor in the raw 10-d space, as the no-projection
          reference.
  wrapper: train the radial-basis map and the classifier together on the
          raw 10-d input.

Only the wrapper gets to shape its 2-d view for the classifier's benefit:
its latent space ends up linearly separable even though no linear
projection of the input is.
"""

import numpy as np

from macsvm.baselines import error_rate, nn_classify, pca_fit, pca_project
from macsvm.data import Dataset, gen_spirals
from macsvm.svm import predict_batch, train_ova
from macsvm.training import TrainConfig, predict_two_stage, train_mac


def lift(ds, basis, noise, rng):
    X = ds.X @ basis + noise * rng.standard_normal((ds.n, basis.shape[1]))
    return Dataset(X, ds.y, ds.class_count)


rng = np.random.default_rng(3)
basis, _ = np.linalg.qr(rng.standard_normal((10, 2)))
basis = basis.T                                      # 2 x 10, orthonormal rows
train = lift(gen_spirals(2, 500, seed=0), basis, 0.03, rng)
test = lift(gen_spirals(2, 500, seed=9), basis, 0.03, rng)

# filter: PCA projection chosen before the classifier ever runs
pca = pca_fit(train.X, 2)
ova = train_ova(pca_project(pca, train.X).T, train.y, C=100.0)
filter_err = error_rate(predict_batch(ova, pca_project(pca, test.X).T), test.y)

nn_err = error_rate(nn_classify(train, test.X), test.y)

cfg = TrainConfig(latent_dim=2, basis_count=150, sigma=0.25, lam=1e-4,
                  C=100.0, mu_max_stages=8, seed=0, record_steps=False)
model, _ = train_mac(cfg, train)
wrapper_err = error_rate(predict_two_stage(model, test.X), test.y)

print(f"test error, PCA filter + linear classifier: {filter_err:.1%}")
print(f"test error, 1-NN on the raw 10-d input:     {nn_err:.1%}")
print(f"test error, jointly trained map:            {wrapper_err:.1%}")
