"""Monte Carlo experiment driver.

A point is one ``(pi, pd, ps, M)`` combination.  Every trial draws its
information bits, offset and traces from generators keyed by
``(seed, trial, attempt, role)``, runs each selected decoder on the same
traces and reports per-trial counts; the counts are reduced in trial order,
so the output does not depend on how trials are scheduled over threads.

A trial whose trace cannot be explained inside its drift window is redrawn
with the next ``attempt`` and counted under ``rejected``.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .bcjr import branch_count, decode_separate_bcjr
from .channel import ChannelSpec, Role, draw_offset, transmit_multi, trial_rng
from .code import CodeConfig, SyndromeTrellis, encode, load_code_config
from .lattice import UndecodableTraceError, build_drift_window
from .metric import JointModel
from .stack import StackParams, decode_bistack, decode_stack

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DECODERS = ("sep-bcjr", "stack", "bistack")
CSV_HEADER = ("decoder", "pi", "pd", "ps", "M", "trials", "ber_info", "ber_code", "erasure_rate",
              "f_av", "b_tr", "nu", "rejected", "seconds")
SCHEMA_VERSION = 1
MAX_ATTEMPTS = 1000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    code: str = "cc2"
    N: int | None = None
    points: tuple = ((0.0, 0.01, 0.0),)  # (pi, pd, ps)
    M: tuple = (2,)
    decoders: tuple = DECODERS
    stack: StackParams = StackParams()
    trials: int = 100
    seed: int = 0
    slack: int | None = None
    priors: str = "trellis"
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.points:
            raise ConfigError("no channel points")
        for p in self.points:
            if len(p) != 3:
                raise ConfigError(f"channel point {p} needs (pi, pd, ps)")
            try:
                ChannelSpec(*p)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        if not self.M or any(m < 1 for m in self.M):
            raise ConfigError("M must be >= 1")
        for d in self.decoders:
            if d not in DECODERS:
                raise ConfigError(f"unknown decoder {d!r}; choose from {', '.join(DECODERS)}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.priors not in ("trellis", "uniform"):
            raise ConfigError(f"unknown priors {self.priors!r}")
        if self.slack is not None and self.slack < 0:
            raise ConfigError("slack must be >= 0")

    def code_config(self) -> CodeConfig:
        try:
            return load_code_config(self.code, self.N)
        except (OSError, ValueError, KeyError) as e:
            raise ConfigError(f"code {self.code!r}: {e}") from None


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def config_from_dict(d: dict, base: Path | None = None) -> ExperimentConfig:
    """Build a config from parsed TOML (see README for the schema)."""
    d = dict(d)
    known = {"code", "N", "M", "decoders", "trials", "seed", "slack", "priors", "channel", "decoder", "output"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
    ch = dict(d.get("channel", {}))
    if "points" in ch:
        points = tuple(tuple(float(v) for v in p) for p in ch["points"])
    else:
        pis, pds, pss = (_as_list(ch.get(k, 0.0)) for k in ("pi", "pd", "ps"))
        if ch.get("tie_pi_pd", False):
            points = tuple((float(p), float(p), float(s)) for p, s in itertools.product(pds, pss))
        else:
            points = tuple((float(a), float(b), float(c)) for a, b, c in itertools.product(pis, pds, pss))
    dec = dict(d.get("decoder", {}))
    try:
        sp = StackParams(**dec)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[decoder]: {e}") from None
    out = dict(d.get("output", {}))
    code = str(d.get("code", "cc2"))
    if base is not None and (base / code).exists():
        code = str(base / code)
    try:
        return ExperimentConfig(
            code=code,
            N=d.get("N"),
            points=points,
            M=tuple(int(m) for m in _as_list(d.get("M", 2))),
            decoders=tuple(_as_list(d.get("decoders", list(DECODERS)))),
            stack=sp,
            trials=int(d.get("trials", 100)),
            seed=int(d.get("seed", 0)),
            slack=d.get("slack"),
            priors=str(d.get("priors", "trellis")),
            out=out.get("path"),
            format=str(out.get("format", "csv")),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None


def load_experiment(path) -> ExperimentConfig:
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            d = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {p}: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: {e}") from None
    return config_from_dict(d, p.parent)


@dataclass
class ResultRow:
    decoder: str
    pi: float
    pd: float
    ps: float
    M: int
    trials: int
    ber_info: float
    ber_code: float
    erasure_rate: float
    f_av: float  # mean metric evaluations (branches for sep-bcjr) per codeword
    b_tr: int
    nu: float
    rejected: int
    seconds: float
    info_errors: int = 0
    code_errors: int = 0
    erasures: int = 0
    pops_av: float = 0.0


@dataclass
class TrialOutcome:
    info_errors: int
    code_errors: int
    erasure: bool
    metric_evals: int
    expansions: int
    seconds: float


@dataclass
class _Trial:
    rejected: int
    R: list
    outcomes: dict = field(default_factory=dict)


def draw_trial(trellis: SyndromeTrellis, spec: ChannelSpec, M: int, seed: int, trial: int, attempt: int):
    """Information bits, codeword, offset and traces of one trial attempt."""
    u = trial_rng(seed, trial, Role.INFO, attempt=attempt).integers(0, 2, size=trellis.K, dtype=np.uint8)
    x = encode(trellis, u).bits
    offset = draw_offset(trellis.N, trial_rng(seed, trial, Role.OFFSET, attempt=attempt))
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(attempt), int(Role.CHANNEL)))
    traces = transmit_multi(x ^ offset, spec, M, ss)
    return u, x, offset, traces


def run_decoder(name: str, model: JointModel, params: StackParams, rng: np.random.Generator):
    if name == "sep-bcjr":
        return decode_separate_bcjr(model)
    if name == "stack":
        return decode_stack(model, params, rng)
    if name == "bistack":
        return decode_bistack(model, params, rng)
    raise ValueError(f"unknown decoder {name!r}")


def run_trial(cfg: ExperimentConfig, trellis: SyndromeTrellis, spec: ChannelSpec, M: int, trial: int) -> _Trial:
    for attempt in range(MAX_ATTEMPTS):
        u, x, offset, traces = draw_trial(trellis, spec, M, cfg.seed, trial, attempt)
        try:
            model = JointModel.build(trellis, traces, spec, offset=offset, slack=cfg.slack, priors=cfg.priors)
        except UndecodableTraceError:
            continue
        res = _Trial(attempt, [t.R for t in traces])
        for i, name in enumerate(cfg.decoders):
            r = run_decoder(name, model, cfg.stack, trial_rng(cfg.seed, trial, Role.ERASURE, index=i, attempt=attempt))
            res.outcomes[name] = TrialOutcome(
                int(np.count_nonzero(r.info_bits != u)),
                int(np.count_nonzero(r.codeword != x)),
                bool(r.erasure),
                int(r.metric_evals),
                int(r.expansions),
                float(r.seconds),
            )
        return res
    raise RuntimeError(f"trial {trial}: no decodable draw in {MAX_ATTEMPTS} attempts")


def median_branch_count(trellis: SyndromeTrellis, spec: ChannelSpec, R_all, slack=None) -> int:
    R = int(math.floor(float(np.median(R_all)) + 0.5))
    return branch_count(trellis, build_drift_window(trellis.N, R, spec, slack))


def run_point(cfg: ExperimentConfig, point, M: int, trellis: SyndromeTrellis | None = None,
              threads: int = 1, timing: bool = True) -> list[ResultRow]:
    """Simulate one channel point for every selected decoder."""
    trellis = trellis if trellis is not None else cfg.code_config().trellis()
    spec = ChannelSpec(*point)
    work = range(cfg.trials)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            trials = list(pool.map(lambda t: run_trial(cfg, trellis, spec, M, t), work))
    else:
        trials = [run_trial(cfg, trellis, spec, M, t) for t in work]

    R_all = [r for t in trials for r in t.R]
    b_tr = median_branch_count(trellis, spec, R_all, cfg.slack)
    rejected = sum(t.rejected for t in trials)
    n = cfg.trials
    rows = []
    for name in cfg.decoders:
        outs = [t.outcomes[name] for t in trials]
        info = sum(o.info_errors for o in outs)
        code = sum(o.code_errors for o in outs)
        er = sum(o.erasure for o in outs)
        f_av = sum(o.metric_evals for o in outs) / n
        rows.append(ResultRow(
            decoder=name, pi=spec.pi, pd=spec.pd, ps=spec.ps, M=M, trials=n,
            ber_info=info / (n * trellis.K),
            ber_code=code / (n * trellis.N),
            erasure_rate=er / n,
            f_av=f_av,
            b_tr=b_tr,
            nu=M * b_tr / f_av if f_av > 0 else math.inf,
            rejected=rejected,
            seconds=sum(o.seconds for o in outs) if timing else 0.0,
            info_errors=info, code_errors=code, erasures=er,
            pops_av=sum(o.expansions for o in outs) / n,
        ))
    return rows


def run_experiment(cfg: ExperimentConfig, threads: int = 1, timing: bool = True, progress=None) -> list[ResultRow]:
    trellis = cfg.code_config().trellis()
    rows = []
    for M in cfg.M:
        for point in cfg.points:
            rows.extend(run_point(cfg, point, M, trellis, threads, timing))
            if progress is not None:
                progress(rows[-len(cfg.decoders):])
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[k]) for k in CSV_HEADER])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "rows": [asdict(r) for r in rows]}
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def rows_from_json(text: str) -> list[ResultRow]:
    doc = json.loads(text)
    names = {f.name for f in fields(ResultRow)}
    return [ResultRow(**{k: v for k, v in r.items() if k in names}) for r in doc["rows"]]


def emit_results(rows, path=None, fmt: str = "csv") -> str:
    """Serialize rows as CSV or JSON; write to ``path`` when given."""
    if fmt == "csv":
        text = rows_to_csv(rows)
    elif fmt == "json":
        text = rows_to_json(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as e:
            raise OSError(f"cannot write results to {path}: {e}") from e
    return text


def default_threads() -> int:
    return os.cpu_count() or 1
