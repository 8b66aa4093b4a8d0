"""Lightweight estimator base: fit/predict contract with get_params/set_params."""

from __future__ import annotations

import copy
import inspect


class BaseEstimator:
    """Parameter introspection in the fit/predict idiom.

    Constructor arguments are treated as hyper-parameters: they are stored
    verbatim and never mutated by ``fit``. Fitted state uses a trailing
    underscore (``weights_``).
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep: bool = True) -> dict:
        out = {}
        for name in self._param_names():
            value = getattr(self, name)
            out[name] = value
            if deep and isinstance(value, BaseEstimator):
                for sub, sub_value in value.get_params(deep=True).items():
                    out[f"{name}__{sub}"] = sub_value
        return out

    def set_params(self, **params):
        valid = set(self._param_names())
        nested: dict[str, dict] = {}
        for key, value in params.items():
            if "__" in key:
                head, tail = key.split("__", 1)
                nested.setdefault(head, {})[tail] = value
            elif key in valid:
                setattr(self, key, value)
            else:
                raise ValueError(f"unknown parameter {key!r} for {type(self).__name__}")
        for head, sub_params in nested.items():
            getattr(self, head).set_params(**sub_params)
        return self

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.get_params(deep=False).items())
        return f"{type(self).__name__}({params})"


def clone(estimator):
    """Fresh unfitted copy with the same hyper-parameters."""
    params = {k: copy.deepcopy(v) for k, v in estimator.get_params(deep=False).items()}
    return type(estimator)(**params)
