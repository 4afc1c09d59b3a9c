"""Scikit-learn style estimator wrappers around the separation pipelines.

Each estimator holds its constructor arguments verbatim (get_params /
set_params follow the sklearn contract, so ``sklearn.base.clone`` and
``Pipeline`` work without a scikit-learn dependency here).  ``fit`` learns
the demixing stack and source models from a mixture; ``transform`` applies
the learned per-frequency demixing to a signal and returns the separated
streams projected back onto the reference channel.

Input ``X`` is accepted as a ``MultichannelSignal`` or a (num_samples,
channels) array (sklearn's rows-are-observations convention) together
with the ``sample_rate`` constructor argument.
"""

import inspect

import numpy as np

from .core import MultichannelSignal, SeparationConfig, Spectrogram
from .demixing import demix_data, project_back
from .separator import separate
from .stft import istft, plan_from_ms, stft


def as_multichannel_signal(X, sample_rate) -> MultichannelSignal:
    """Validate/convert input to a MultichannelSignal.

    Arrays are interpreted as (num_samples, channels), matching sklearn's
    sample-major layout; pass a MultichannelSignal to skip conversion.
    """
    if isinstance(X, MultichannelSignal):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"X must be 2-D (num_samples, channels), got ndim={arr.ndim}")
    if arr.shape[0] < arr.shape[1]:
        raise ValueError(
            f"X has shape {arr.shape}; expected more samples than channels (samples are rows)"
        )
    return MultichannelSignal(samples=arr.T, sample_rate=sample_rate)


class SeparatorBase:
    """Common estimator machinery: parameter introspection and the
    fit/transform surface."""

    _algorithm = None  # set by subclasses

    @classmethod
    def _get_param_names(cls):
        sig = inspect.signature(cls.__init__)
        return sorted(p.name for p in sig.parameters.values() if p.name != "self")

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._get_param_names()}

    def set_params(self, **params):
        valid = set(self._get_param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in sorted(self.get_params().items()))
        return f"{type(self).__name__}({args})"

    def _config(self):
        return SeparationConfig(
            algorithm=self._algorithm,
            K=getattr(self, "n_bases", 1),
            iterations=self.n_iter,
            seed=self.random_state,
            window_ms=self.window_ms,
            hop_ms=self.hop_ms,
            ref_channel=self.ref_channel,
            prune_threshold=getattr(self, "prune_threshold", 1e-3),
            prune_burn_in=getattr(self, "prune_burn_in", 10),
        )

    def fit(self, X, y=None):
        """Learn the demixing stack from a mixture signal."""
        signal = as_multichannel_signal(X, self.sample_rate)
        result = separate(signal, self._config())
        self.result_ = result
        self.demixing_ = result.demixing
        self.models_ = result.models
        self.diagnostics_ = result.diagnostics
        self.active_bases_ = result.diagnostics.active_bases[-1].copy()
        self.n_features_in_ = signal.channels
        return self

    def _check_fitted(self):
        if not hasattr(self, "demixing_"):
            raise AttributeError(f"{type(self).__name__} is not fitted yet; call fit first")

    def transform(self, X):
        """Demix a signal with the fitted per-frequency stack.

        Returns (num_samples, channels) separated streams projected back
        onto the reference channel.
        """
        self._check_fitted()
        signal = as_multichannel_signal(X, self.sample_rate)
        if signal.channels != self.n_features_in_:
            raise ValueError(
                f"X has {signal.channels} channels; fitted for {self.n_features_in_}"
            )
        plan = plan_from_ms(self.window_ms, self.hop_ms, signal.sample_rate)
        spec = stft(signal, plan)
        if spec.bins != self.demixing_.bins:
            raise ValueError(
                "signal's spectrogram geometry does not match the fitted demixing stack"
            )
        Y = demix_data(self.demixing_.matrices, spec.data)
        img = project_back(self.demixing_.matrices, Y, self.ref_channel)
        out = istft(
            Spectrogram(
                data=img,
                window_len_samples=spec.window_len_samples,
                hop_samples=spec.hop_samples,
                sample_rate=spec.sample_rate,
            ),
            plan,
            signal.num_samples,
        )
        return out.samples.T

    def fit_transform(self, X, y=None):
        self.fit(X)
        return self.result_.sources.samples.T

    def separate(self, X):
        """Domain-level API: fit on the mixture and return the full
        SeparationResult."""
        self.fit(X)
        return self.result_


class AuxIVA(SeparatorBase):
    """Auxiliary-function IVA with a time-varying spherical source model."""

    _algorithm = "auxiva"

    def __init__(self, sample_rate=16000, n_iter=100, window_ms=512.0, hop_ms=128.0,
                 ref_channel=0, random_state=0):
        self.sample_rate = sample_rate
        self.n_iter = n_iter
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.ref_channel = ref_channel
        self.random_state = random_state


class ILRMA(SeparatorBase):
    """Fixed-rank NMF source models unified with IVA demixing."""

    _algorithm = "ilrma"

    def __init__(self, n_bases=5, sample_rate=16000, n_iter=100, window_ms=512.0,
                 hop_ms=128.0, ref_channel=0, random_state=0):
        self.n_bases = n_bases
        self.sample_rate = sample_rate
        self.n_iter = n_iter
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.ref_channel = ref_channel
        self.random_state = random_state


class VBNonparametric(SeparatorBase):
    """Adaptive-complexity variational source models with per-basis
    reliability weights and pruning."""

    _algorithm = "vb_nonparametric"

    def __init__(self, n_bases=30, sample_rate=16000, n_iter=100, window_ms=512.0,
                 hop_ms=128.0, ref_channel=0, prune_threshold=1e-3, prune_burn_in=10,
                 random_state=0):
        self.n_bases = n_bases
        self.sample_rate = sample_rate
        self.n_iter = n_iter
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.ref_channel = ref_channel
        self.prune_threshold = prune_threshold
        self.prune_burn_in = prune_burn_in
        self.random_state = random_state
