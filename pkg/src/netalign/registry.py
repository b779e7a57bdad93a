"""Name -> aligner lookup with typed parameter overrides."""
from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional

from .consistency import ConsistencyConfig, final_align, isorank_align
from .embedding import RWRConfig, XNetMFConfig, regal_align, rwr_align
from .errors import InvalidInputError
from .graph import AlignmentMatrix, AlignmentTask
from .ot import GW_DEFAULTS, OTConfig, gw_align, parrot_lite_align


@dataclass(frozen=True)
class AlgoEntry:
    name: str
    config_cls: type
    defaults: Any
    # called as run(task, cfg, **extra)
    run: Callable[..., AlignmentMatrix]
    extra: Mapping[str, Any] = dataclasses.field(default_factory=dict)
    # the run seed feeds this config field unless it is set explicitly
    seed_field: Optional[str] = None


ALGORITHMS = {
    e.name: e
    for e in (
        AlgoEntry("isorank", ConsistencyConfig, ConsistencyConfig(), lambda t, c: isorank_align(t, c)),
        AlgoEntry("final", ConsistencyConfig, ConsistencyConfig(), lambda t, c: final_align(t, c)),
        AlgoEntry("regal", XNetMFConfig, XNetMFConfig(), lambda t, c: regal_align(t, c), seed_field="seed"),
        AlgoEntry("rwr-align", RWRConfig, RWRConfig(), lambda t, c: rwr_align(t, c)),
        AlgoEntry("parrot-lite", OTConfig, OTConfig(), lambda t, c: parrot_lite_align(t, c)),
        AlgoEntry("gw-align", OTConfig, GW_DEFAULTS, lambda t, c, hops: gw_align(t, hops, c), {"hops": 2}),
    )
}


def get(name: str) -> AlgoEntry:
    try:
        return ALGORITHMS[name]
    except KeyError:
        raise InvalidInputError(f"unknown algorithm {name!r}; registered: {', '.join(ALGORITHMS)}") from None


def parse_value(text: str):
    """``--param`` values are JSON when they parse as JSON, else strings."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InvalidInputError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = parse_value(value)
    return out


def _coerce(name: str, hint, value):
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        if value is None:
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    if hint is bool:
        if isinstance(value, bool):
            return value
    elif hint is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif hint is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif hint is str:
        if isinstance(value, str):
            return value
    raise InvalidInputError(f"parameter {name!r}: cannot use {value!r} as {getattr(hint, '__name__', hint)}")


def resolve(name: str, params: Optional[Mapping[str, Any]] = None, seed: Optional[int] = None):
    """Merge ``params`` over the algorithm defaults.

    Returns ``(entry, cfg, extra, resolved)`` where ``resolved`` is the full
    flat parameter dict, enough to re-create the run.
    """
    entry = get(name)
    params = dict(params or {})
    hints = typing.get_type_hints(entry.config_cls)
    fields = {f.name for f in dataclasses.fields(entry.config_cls)}
    updates, extra = {}, dict(entry.extra)
    if entry.seed_field and entry.seed_field not in params and seed is not None:
        params[entry.seed_field] = int(seed)
    for key, value in params.items():
        if key in fields:
            updates[key] = _coerce(key, hints[key], value)
        elif key in extra:
            extra[key] = _coerce(key, type(extra[key]), value)
        else:
            known = sorted(fields | set(extra))
            raise InvalidInputError(f"{name} has no parameter {key!r}; known: {', '.join(known)}")
    cfg = dataclasses.replace(entry.defaults, **updates)
    resolved = dict(dataclasses.asdict(cfg), **extra)
    return entry, cfg, extra, resolved


def make_job(name: str, task: AlignmentTask, params: Optional[Mapping[str, Any]] = None,
             seed: Optional[int] = None):
    """Bind an aligner to ``task``; returns ``(job, resolved_params)``."""
    entry, cfg, extra, resolved = resolve(name, params, seed)
    return (lambda: entry.run(task, cfg, **extra)), resolved
