"""CSV/JSON ingestion and emission, run configs and manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import __version__
from .cvaudit import CvRecord, Employment
from .simulate import MCAR, Group, MissingnessConfig, NMARTwoGroup, PopulationSpec, SimulatedDataset
from .study import Decision, Difficulty, ExaminerAttributes, ResponseRecord, SourceLabel, StudyDesign
from .sweep import default_grid, parse_grid, check_grid

RECORD_HEADER = ("examiner_id", "item_id", "truth", "decision", "difficulty")
DESIGN_HEADER = ("examiner_id", "item_id", "truth")
CV_HEADER = ("expert_id", "afte_member", "employment")
FLAGS_HEADER = ("examiner_id", "high_nonresponse")


class DataError(ValueError):
    """Malformed input data; ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ":".join(str(x) for x in (path, line) if x is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path, self.line = path, line


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# ---- CSV primitives ---------------------------------------------------------

def _rows(path, header: Sequence[str] | None = None, prefix: Sequence[str] | None = None):
    """Yield ``(line_number, row_dict)``; the header must equal ``header`` or start with ``prefix``."""
    path = str(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(str(exc), path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise DataError("empty file, header required", path, 1) from None
        got = [h.strip() for h in got]
        if header is not None and tuple(got) != tuple(header):
            raise DataError(f"expected header {','.join(header)}, got {','.join(got)}", path, 1)
        if prefix is not None and tuple(got[: len(prefix)]) != tuple(prefix):
            raise DataError(f"header must start with {','.join(prefix)}", path, 1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(got):
                raise DataError(f"expected {len(got)} fields, got {len(row)}", path, line)
            yield line, dict(zip(got, (c.strip() for c in row)))


def _enum(kind, value: str, path, line, column):
    try:
        return kind(value)
    except ValueError:
        allowed = ",".join(m.value for m in kind)
        raise DataError(f"{column}={value!r} not in {{{allowed}}}", path, line) from None


def fmt_float(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(fmt_float(v) if isinstance(v, float) or v is None else v for v in row)
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---- study data -------------------------------------------------------------

def read_records(path) -> list[ResponseRecord]:
    out = []
    for line, row in _rows(path, RECORD_HEADER):
        if not row["examiner_id"] or not row["item_id"]:
            raise DataError("examiner_id and item_id must be nonempty", str(path), line)
        decision = _enum(Decision, row["decision"], path, line, "decision") if row["decision"] else None
        difficulty = _enum(Difficulty, row["difficulty"], path, line, "difficulty") if row["difficulty"] else None
        out.append(ResponseRecord(
            row["examiner_id"], row["item_id"], _enum(SourceLabel, row["truth"], path, line, "truth"),
            decision, difficulty,
        ))
    return out


def records_csv(records: Iterable[ResponseRecord]) -> str:
    return csv_text(RECORD_HEADER, (
        (r.examiner_id, r.item_id, r.truth.value,
         r.decision.value if r.decision else "", r.difficulty.value if r.difficulty else "")
        for r in records
    ))


def read_design(path, enrolled: int | None = None) -> StudyDesign:
    assignments: dict[str, list[tuple[str, SourceLabel]]] = {}
    seen: set[tuple[str, str]] = set()
    for line, row in _rows(path, DESIGN_HEADER):
        key = (row["examiner_id"], row["item_id"])
        if not all(key):
            raise DataError("examiner_id and item_id must be nonempty", str(path), line)
        if key in seen:
            raise DataError(f"duplicate assignment {key}", str(path), line)
        seen.add(key)
        assignments.setdefault(key[0], []).append((key[1], _enum(SourceLabel, row["truth"], path, line, "truth")))
    n = len(assignments) if enrolled is None else enrolled
    try:
        return StudyDesign({ex: tuple(v) for ex, v in assignments.items()}, n)
    except ValueError as exc:
        raise DataError(str(exc), str(path)) from None


def design_csv(design: StudyDesign) -> str:
    return csv_text(DESIGN_HEADER, (
        (ex, item, truth.value) for ex, items in design.assignments.items() for item, truth in items
    ))


def _bit(value: str, path, line, column) -> bool | None:
    if value == "":
        return None
    if value in ("0", "1"):
        return value == "1"
    raise DataError(f"{column}={value!r} must be 0, 1 or empty", str(path), line)


def read_attributes(path) -> list[ExaminerAttributes]:
    out = []
    for line, row in _rows(path, prefix=("examiner_id",)):
        ex = row.pop("examiner_id")
        out.append(ExaminerAttributes(ex, {k: _bit(v, path, line, k) for k, v in row.items()}))
    return out


def read_flags(path) -> dict[str, bool]:
    out = {}
    for line, row in _rows(path, FLAGS_HEADER):
        flag = _bit(row["high_nonresponse"], path, line, "high_nonresponse")
        if flag is None:
            raise DataError("high_nonresponse must be 0 or 1", str(path), line)
        out[row["examiner_id"]] = flag
    return out


def flags_csv(flags: dict[str, bool]) -> str:
    return csv_text(FLAGS_HEADER, ((ex, int(f)) for ex, f in sorted(flags.items())))


def read_cv_records(path) -> list[CvRecord]:
    out = []
    for line, row in _rows(path, CV_HEADER):
        if not row["expert_id"]:
            raise DataError("expert_id must be nonempty", str(path), line)
        out.append(CvRecord(
            row["expert_id"], _bit(row["afte_member"], path, line, "afte_member"),
            _enum(Employment, row["employment"], path, line, "employment"),
        ))
    return out


# ---- experiment config -------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    spec: PopulationSpec = field(default_factory=PopulationSpec)
    missingness: MissingnessConfig = field(default_factory=MissingnessConfig)
    seed: int = 0
    grid: tuple[float, ...] = field(default_factory=default_grid)
    level: float = 0.95

    def resolved(self) -> dict:
        """Canonical JSON-ready form; hashed into the manifest."""
        mech = self.missingness.mechanism
        if isinstance(mech, MCAR):
            m = {"kind": "mcar", "rate": mech.rate}
        else:
            m = {"kind": "nmar_two_group", "pi": mech.pi, "target_overall": mech.target_overall,
                 "group_b_target": mech.group_b_target, "exact_weights": mech.exact_weights}
        m["clamp_theta"] = self.missingness.clamp_theta
        return {
            "spec": {
                "n_examiners": self.spec.n_examiners,
                "items": self.spec.items_per_examiner,
                "groups": [[g.size, g.p_low, g.p_high] for g in self.spec.groups],
            },
            "mechanism": m,
            "seed": self.seed,
            "grid": list(self.grid),
            "level": self.level,
        }


_TOP = {"spec", "mechanism", "seed", "grid", "level"}
_SPEC = {"n_examiners", "items", "groups"}
_MECH = {"kind", "pi", "rate", "target_overall", "group_b_target", "clamp_theta", "exact_weights"}


def _num(obj: dict, key: str, where: str, default=None, kind=float):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}", "required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)):
        raise ConfigError(f"{where}.{key}", f"expected {kind.__name__}, got {v!r}")
    return kind(v)


def _unknown(obj: dict, allowed: set, where: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}.{extra[0]}" if where else extra[0], "unknown field")


def parse_config(obj: Any) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _unknown(obj, _TOP, "")
    spec_obj = obj.get("spec", {})
    if not isinstance(spec_obj, dict):
        raise ConfigError("spec", "must be an object")
    _unknown(spec_obj, _SPEC, "spec")
    default_spec = PopulationSpec()
    groups_raw = spec_obj.get("groups", [[g.size, g.p_low, g.p_high] for g in default_spec.groups])
    try:
        groups = tuple(Group(int(s), float(lo), float(hi)) for s, lo, hi in groups_raw)
        spec = PopulationSpec(
            _num(spec_obj, "n_examiners", "spec", default_spec.n_examiners, int),
            _num(spec_obj, "items", "spec", default_spec.items_per_examiner, int),
            groups,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("spec.groups", str(exc)) from None

    mech_obj = obj.get("mechanism", {})
    if not isinstance(mech_obj, dict):
        raise ConfigError("mechanism", "must be an object")
    _unknown(mech_obj, _MECH, "mechanism")
    kind = mech_obj.get("kind", "nmar_two_group")
    clamp = mech_obj.get("clamp_theta", True)
    if not isinstance(clamp, bool):
        raise ConfigError("mechanism.clamp_theta", "expected boolean")
    try:
        if kind == "mcar":
            mech = MCAR(_num(mech_obj, "rate", "mechanism"))
        elif kind == "nmar_two_group":
            exact = mech_obj.get("exact_weights", False)
            if not isinstance(exact, bool):
                raise ConfigError("mechanism.exact_weights", "expected boolean")
            mech = NMARTwoGroup(
                _num(mech_obj, "pi", "mechanism", 0.0),
                _num(mech_obj, "target_overall", "mechanism", 0.179),
                _num(mech_obj, "group_b_target", "mechanism", 0.4),
                exact,
            )
        else:
            raise ConfigError("mechanism.kind", f"expected 'mcar' or 'nmar_two_group', got {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("mechanism", str(exc)) from None

    seed = _num(obj, "seed", "", 0, int) if "seed" in obj else 0
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    grid_raw = obj.get("grid")
    try:
        if grid_raw is None:
            grid = default_grid()
        elif isinstance(grid_raw, str):
            grid = parse_grid(grid_raw)
        else:
            grid = tuple(float(v) for v in grid_raw)
            check_grid(grid)
    except (TypeError, ValueError) as exc:
        raise ConfigError("grid", str(exc)) from None
    level = _num(obj, "level", "", 0.95) if "level" in obj else 0.95
    if not 0.0 < level < 1.0:
        raise ConfigError("level", "must lie in (0, 1)")
    return RunConfig(spec, MissingnessConfig(mech, clamp), seed, grid, level)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno}: {exc.msg}") from None
    return parse_config(obj)


# ---- manifests and exports ---------------------------------------------------

def digest(obj: Any) -> str:
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(canonical.encode()).hexdigest()


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def manifest(command: str, config: dict, base_seed: int | None = None, started_at: str | None = None) -> dict:
    return {
        "command": command,
        "config": config,
        "config_digest": digest(config),
        "base_seed": base_seed,
        "tool_version": __version__,
        "started_at": started_at or now_utc(),
        "finished_at": now_utc(),
    }


def dataset_sidecar(ds: SimulatedDataset, config: RunConfig) -> dict:
    return {
        "seed": ds.seed,
        "pi": ds.pi,
        "p": ds.p.tolist(),
        "theta": ds.theta.tolist(),
        "y": ds.y.tolist(),
        "m": ds.m.tolist(),
        "realized_missing": ds.realized_missing,
        "config": config.resolved(),
    }
