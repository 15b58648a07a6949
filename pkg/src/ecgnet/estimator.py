"""scikit-learn style front end around the network and fit loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .network import DEFAULT_CONV_PARTS, ModelConfig, SevggLstm
from .training import Dataset, TrainConfig, fit_model, oversample
from .validation import as_float_matrix, as_label_vector


class SevggLstmClassifier(BaseEstimator, ClassifierMixin):
    """SE-VGG11 + LSTM classifier for fixed-length 1D segments.

    X is (n_samples, segment_len) with segment_len >= 32; rows are expected
    to be amplitude-normalized already.  Composes with sklearn tooling via
    the standard fit/predict/predict_proba/get_params surface.

    Parameters mirror the network and fit-loop knobs: ``conv_parts`` is five
    (layer_count, channels) pairs, ``fc_hidden`` the widths of the first two
    dense layers (the third is the class count), ``oversample`` balances the
    training set by duplication before fitting.
    """

    def __init__(
        self,
        conv_parts=DEFAULT_CONV_PARTS,
        kernel_len=3,
        se_positions=(4, 5),
        se_reduction=16,
        lstm_hidden=128,
        fc_hidden=(256, 64),
        epochs=30,
        batch_size=32,
        learning_rate=1e-3,
        optimizer="adam",
        oversample=True,
        seed=0,
    ):
        self.conv_parts = conv_parts
        self.kernel_len = kernel_len
        self.se_positions = se_positions
        self.se_reduction = se_reduction
        self.lstm_hidden = lstm_hidden
        self.fc_hidden = fc_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.oversample = oversample
        self.seed = seed

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            seed=self.seed,
            oversample=self.oversample,
        )

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_label_vector(y, X.shape[0])
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValueError("fit needs at least two classes")
        fc_hidden = tuple(int(w) for w in self.fc_hidden)
        if len(fc_hidden) != 2:
            raise ValueError("fc_hidden must give the two hidden dense widths")
        config = ModelConfig(
            input_len=X.shape[1],
            num_classes=self.classes_.shape[0],
            conv_parts=self.conv_parts,
            kernel_len=self.kernel_len,
            se_positions=self.se_positions,
            se_reduction=self.se_reduction,
            lstm_hidden=self.lstm_hidden,
            fc_sizes=fc_hidden + (self.classes_.shape[0],),
        )
        cfg = self._train_config()
        x_train, y_train = X, encoded
        if self.oversample:
            codes = tuple(str(c) for c in self.classes_)
            balanced = oversample(Dataset(x=X, y=encoded, codes=codes), seed=self.seed + 2)
            x_train, y_train = balanced.x, balanced.y
        self.model_ = SevggLstm.build(config, seed=self.seed)
        self.history_ = fit_model(
            self.model_, x_train, y_train, cfg, shuffle_rng=np.random.default_rng(self.seed + 1)
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this SevggLstmClassifier instance is not fitted yet")

    def predict_proba(self, X):
        self._check_fitted()
        X = as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, fit saw {self.n_features_in_}")
        return self.model_.predict_proba(X)

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[probs.argmax(axis=1)]
