"""Experiment configuration: flat dotted-key text format with defaults.

The defaults reproduce the reaction-diffusion benchmark end to end; any key
can be overridden from a config file or programmatically.
"""

import hashlib
from dataclasses import dataclass, field, fields

from .errors import ParameterError


def _parse_bool(s):
    s = s.strip().lower()
    if s in ("true", "1", "yes", "on"):
        return True
    if s in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s):
    return [float(tok) for tok in s.replace(",", " ").split()]


def _parse_ints(s):
    return [int(tok) for tok in s.replace(",", " ").split()]


def _parse_triples(s):
    out = []
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        vals = [int(tok) for tok in chunk.replace(",", " ").split()]
        if len(vals) != 3:
            raise ValueError(f"observable triple needs 3 integers: {chunk!r}")
        out.append(tuple(vals))
    return out


def _fmt_floats(v):
    return ", ".join(f"{x:.17g}" for x in v)


def _fmt_triples(v):
    return "; ".join(" ".join(str(i) for i in t) for t in v)


def _default_triples():
    r = (1, 2, 3)
    return [(i, k, l) for i in r for k in r for l in r]


@dataclass
class ExperimentConfig:
    plant_rho: float = 1.0
    plant_a: float = 0.5
    plant_quad: float = 0.5
    plant_blowup: float = 1e3
    plant_rtol: float = 1e-8
    plant_atol: float = 1e-10
    grid_n: int = 101
    dictionary_triples: list = field(default_factory=_default_triples)
    data_m: int = 200
    data_t_s: float = 0.1
    data_seed: int = 1
    data_deriv_t0: float = 0.05
    data_deriv_u0: float = 0.1
    ic_amp: float = 0.8
    ic_freq: float = 0.42
    ic_phase: float = 2.0 / 3.0
    ic_half_width: float = 0.04
    ic_modes: int = 5
    edmd_rank_tol: float = 1e-6
    edmd_n: int = 2
    edmd_selection: str = "sieve"      # sieve | manual | all
    edmd_manual_indices: list = field(default_factory=list)
    edmd_integer_tol: float = 0.15
    edmd_max_multiple: int = 12
    edmd_score_tol: float = 0.5
    edmd_validation_horizon: float = 0.6
    edmd_validation_ic: float = 0.8
    edmd_normalization: str = "pair"   # pair | unit | linear
    control_targets: list = field(default_factory=lambda: [-1.0, -12.0])
    control_d_max: int = 11
    control_tol_res: float = 1e-6
    control_box_mode: str = "paper"    # paper | data
    control_box: list = field(default_factory=lambda: [-0.65, 0.65, -0.1, 0.1])
    control_box_inflate: float = 1.1
    control_quad_order: int = 0        # 0 -> 2 d_max + 2
    control_galerkin: bool = False
    control_galerkin_iters: int = 30
    control_galerkin_tol: float = 1e-9
    sim_horizon: float = 5.0
    sim_scale_bilinear: float = 2.4
    sim_scale_pde: float = 3.1
    sim_fig_dt: float = 0.01
    sim_profile_dt: float = 0.2
    out_dir: str = "runs/paper"

    def box_intervals(self):
        vals = self.control_box
        if len(vals) % 2:
            raise ParameterError("control.box needs an even number of bounds")
        return [(vals[2 * i], vals[2 * i + 1]) for i in range(len(vals) // 2)]


_PARSERS = {
    int: int,
    float: float,
    bool: _parse_bool,
    str: lambda s: s.strip(),
}

# dotted key -> (attribute, parser, formatter)
_KEYMAP = {}
for f in fields(ExperimentConfig):
    dotted = f.name.replace("_", ".", 1)
    if f.name == "dictionary_triples":
        entry = (f.name, _parse_triples, _fmt_triples)
    elif f.name == "edmd_manual_indices":
        entry = (f.name, _parse_ints, lambda v: ", ".join(str(i) for i in v))
    elif f.name in ("control_targets", "control_box"):
        entry = (f.name, _parse_floats, _fmt_floats)
    else:
        typ = f.type if isinstance(f.type, type) else {"float": float, "int": int,
                                                       "bool": bool, "str": str}[f.type]
        entry = (f.name, _PARSERS[typ], lambda v: f"{v:.17g}" if isinstance(v, float) else str(v))
    _KEYMAP[dotted] = entry


def parse_config(text, base=None):
    """Parse dotted key = value lines into an ExperimentConfig."""
    cfg = base if base is not None else ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYMAP:
            raise ParameterError(f"config line {lineno}: unknown key {key!r}")
        attr, parser, _ = _KEYMAP[key]
        try:
            setattr(cfg, attr, parser(value))
        except (ValueError, TypeError) as exc:
            raise ParameterError(f"config line {lineno}: bad value for {key}: {exc}")
    validate_config(cfg)
    return cfg


def load_config(path, base=None):
    with open(path) as fh:
        return parse_config(fh.read(), base=base)


def serialize_config(cfg):
    lines = []
    for dotted in sorted(_KEYMAP):
        attr, _, fmt = _KEYMAP[dotted]
        lines.append(f"{dotted} = {fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]


def validate_config(cfg):
    if cfg.grid_n < 11 or cfg.grid_n % 2 == 0:
        raise ParameterError("grid.n must be odd and >= 11")
    if cfg.plant_rho <= 0:
        raise ParameterError("plant.rho must be positive")
    if cfg.data_m < 1:
        raise ParameterError("data.m must be >= 1")
    if cfg.data_t_s <= 0:
        raise ParameterError("data.t_s must be positive")
    if cfg.ic_freq == 0:
        raise ParameterError("ic.freq must be nonzero")
    if cfg.edmd_n < 1 or cfg.edmd_n > len(cfg.dictionary_triples):
        raise ParameterError("edmd.n out of range")
    if cfg.edmd_selection not in ("sieve", "manual", "all"):
        raise ParameterError("edmd.selection must be sieve, manual, or all")
    if cfg.edmd_selection == "manual" and len(cfg.edmd_manual_indices) != cfg.edmd_n:
        raise ParameterError("edmd.manual_indices must list edmd.n indices")
    if cfg.edmd_normalization not in ("pair", "unit", "linear"):
        raise ParameterError("edmd.normalization must be pair, unit, or linear")
    if len(cfg.control_targets) != cfg.edmd_n:
        raise ParameterError("control.targets must list edmd.n eigenvalues")
    if cfg.control_box_mode not in ("paper", "data"):
        raise ParameterError("control.box_mode must be paper or data")
    if cfg.control_box_mode == "paper" and len(cfg.control_box) != 2 * cfg.edmd_n:
        raise ParameterError("control.box must list two bounds per model dimension")
    if cfg.control_d_max < 1:
        raise ParameterError("control.d_max must be >= 1")
    if cfg.sim_horizon <= 0:
        raise ParameterError("sim.horizon must be positive")
    return cfg
