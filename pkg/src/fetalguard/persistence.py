"""Model artifact files: one JSON per trained detector, dispatched by model_type."""

from __future__ import annotations

import json
from pathlib import Path

from . import autoencoder, ganomaly, iforest
from .errors import ConfigError

_DECODERS = {
    "ae": autoencoder.model_from_dict,
    "ganomaly": ganomaly.model_from_dict,
    "iforest": iforest.model_from_dict,
}


def model_to_dict(model) -> dict:
    if isinstance(model, autoencoder.AeModel):
        return autoencoder.model_to_dict(model)
    if isinstance(model, ganomaly.GanomalyModel):
        return ganomaly.model_to_dict(model)
    if isinstance(model, iforest.IsolationForestModel):
        return iforest.model_to_dict(model)
    raise ConfigError(f"cannot serialize model of type {type(model).__name__}")


def save_model(model, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    model_type = data.get("model_type")
    decoder = _DECODERS.get(model_type)
    if decoder is None:
        raise ConfigError(
            f"{path}: unknown model_type {model_type!r}; expected one of {sorted(_DECODERS)}"
        )
    return decoder(data)
