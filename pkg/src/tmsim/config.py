"""Flat key = value run configuration with strict validation.

Unknown keys are errors (no silent typos); # starts a comment.  The
manifest written by a run echoes the resolved config in the same format,
so any run is reproducible from its manifest alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError, ValidationError
from .grid import GridSpec
from .initial_data import DataFamily, KINDS

DEFAULTS = {
    "cfl": 0.2,
    "diag_cadence": 10,
    "snapshot_cadence": 0,
    "output_dir": "tmsim_out",
    "seed": 0,
    "workers": 1,
    "allow_wrap": False,
    "allow_any_n": False,
    "data_kind": "gaussian_bump",
    "epsilon": 0.05,
    "sigma": 1.0,
    "center": (),
    "polarization": (),
    "axis": 1,
    "profile": "bump",
    "rate": 0.0,
    "offset": 0.0,
}

_REQUIRED = ("n", "q", "L", "N", "t_final")

_INT_KEYS = {"n", "q", "N", "diag_cadence", "snapshot_cadence", "seed", "workers", "axis"}
_FLOAT_KEYS = {"L", "cfl", "t_final", "epsilon", "sigma", "rate", "offset"}
_BOOL_KEYS = {"allow_wrap", "allow_any_n"}
_TUPLE_KEYS = {"center", "polarization"}
_STR_KEYS = {"output_dir", "data_kind", "profile"}

ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _TUPLE_KEYS | _STR_KEYS


@dataclass
class SimConfig:
    """Fully resolved, validated description of one run."""

    n: int
    q: int
    L: float
    N: int
    t_final: float
    cfl: float = DEFAULTS["cfl"]
    diag_cadence: int = DEFAULTS["diag_cadence"]
    snapshot_cadence: int = DEFAULTS["snapshot_cadence"]
    output_dir: str = DEFAULTS["output_dir"]
    seed: int = DEFAULTS["seed"]
    workers: int = DEFAULTS["workers"]
    allow_wrap: bool = DEFAULTS["allow_wrap"]
    allow_any_n: bool = DEFAULTS["allow_any_n"]
    data_kind: str = DEFAULTS["data_kind"]
    epsilon: float = DEFAULTS["epsilon"]
    sigma: float = DEFAULTS["sigma"]
    center: tuple = DEFAULTS["center"]
    polarization: tuple = DEFAULTS["polarization"]
    axis: int = DEFAULTS["axis"]
    profile: str = DEFAULTS["profile"]
    rate: float = DEFAULTS["rate"]
    offset: float = DEFAULTS["offset"]

    def __post_init__(self):
        validate(self)

    def grid(self) -> GridSpec:
        return GridSpec(n=self.n, q=self.q, half_width=self.L, points_per_axis=self.N)

    def family(self) -> DataFamily:
        return DataFamily(
            kind=self.data_kind, amplitude=self.epsilon, width=self.sigma,
            center=self.center, polarization=self.polarization,
            axis=self.axis, profile=self.profile,
            rate=self.rate, offset=self.offset,
        )

    def to_text(self) -> str:
        """Canonical key = value echo (itself a valid config)."""
        lines = []
        for key in sorted(ALL_KEYS):
            val = getattr(self, key)
            if key in _TUPLE_KEYS:
                if not val:
                    continue
                val = ",".join(repr(float(v)) for v in val)
            elif key in _BOOL_KEYS:
                val = "true" if val else "false"
            elif key in _FLOAT_KEYS:
                val = repr(float(val))
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def validate(cfg: SimConfig):
    if cfg.n < 2:
        raise ValidationError("n", f"spatial dimension must be >= 2, got {cfg.n}")
    if cfg.n not in (2, 3) and not cfg.allow_any_n:
        raise ValidationError(
            "n", f"desk-scale acceptance covers n in {{2,3}}, got {cfg.n}; "
            "set allow_any_n = true to override")
    if cfg.q < 1:
        raise ValidationError("q", f"codimension must be >= 1, got {cfg.q}")
    if cfg.N < 16 or cfg.N % 2 != 0:
        raise ValidationError("N", f"points per axis must be even and >= 16, got {cfg.N}")
    if cfg.L <= 0:
        raise ValidationError("L", f"box half-width must be positive, got {cfg.L}")
    if not (0.0 < cfg.cfl <= 0.25):
        raise ValidationError("cfl", f"exceeds 0.25 (or nonpositive): {cfg.cfl}")
    if cfg.t_final <= 0:
        raise ValidationError("t_final", f"must be positive, got {cfg.t_final}")
    if cfg.diag_cadence < 1:
        raise ValidationError("diag_cadence", "must be >= 1")
    if cfg.snapshot_cadence < 0:
        raise ValidationError("snapshot_cadence", "must be >= 0")
    if cfg.workers < 1:
        raise ValidationError("workers", "must be >= 1")
    if not (0.0 <= cfg.epsilon <= 1.0):
        raise ValidationError("epsilon", f"amplitude must lie in [0, 1], got {cfg.epsilon}")
    if cfg.sigma <= 0:
        raise ValidationError("sigma", f"width must be positive, got {cfg.sigma}")
    if cfg.data_kind not in KINDS or cfg.data_kind == "custom":
        raise ValidationError("data_kind",
                              f"must be one of {[k for k in KINDS if k != 'custom']}, got {cfg.data_kind!r}")
    if not (1 <= cfg.axis <= cfg.n):
        raise ValidationError("axis", f"must be in 1..{cfg.n}, got {cfg.axis}")
    try:
        fam = cfg.family()
    except ValueError as exc:
        raise ValidationError("data", str(exc))
    r_support = fam.support_radius()
    if r_support is not None and not cfg.allow_wrap:
        dx = 2.0 * cfg.L / cfg.N
        need = r_support + cfg.t_final + 5.0 * dx
        if cfg.L < need:
            raise ValidationError(
                "L", f"no-wrap rule violated: L = {cfg.L} but r_support + t_final + 5 dx "
                f"= {r_support} + {cfg.t_final} + {5.0 * dx:.6g} = {need:.6g}; enlarge L, "
                "shorten t_final, or set allow_wrap = true")


def parse_config(text: str) -> SimConfig:
    """Parse and validate flat key = value text."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(line_no, f"expected key = value, got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in ALL_KEYS and key not in _REQUIRED:
            raise ParseError(line_no, f"unknown key {key!r}")
        if key in values:
            raise ParseError(line_no, f"duplicate key {key!r}")
        if not val:
            raise ParseError(line_no, f"empty value for {key!r}")
        values[key] = _convert(key, val, line_no)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ValidationError(missing[0], "required key missing")
    return SimConfig(**values)


def _convert(key: str, val: str, line_no: int):
    try:
        if key in _INT_KEYS:
            return int(val)
        if key in _FLOAT_KEYS:
            return float(val)
        if key in _BOOL_KEYS:
            low = val.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {val!r}")
        if key in _TUPLE_KEYS:
            return tuple(float(p) for p in val.split(",") if p.strip())
        return val
    except ValueError as exc:
        raise ParseError(line_no, f"bad value for {key}: {exc}")


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
