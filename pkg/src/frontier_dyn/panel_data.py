"""Panel data model: variable roles, validation, CSV ingestion, synthetic generation.

The engine consumes a dense tensor of non-negative values indexed by
(DMU, period, variable). Every variable plays exactly one role: ordinary
input, ordinary output, or a carry-over link between consecutive periods.
Good links behave like outputs (more is better), bad links like inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "VariableRole",
    "Variable",
    "PanelDataset",
    "VariableSpec",
    "GeneratorSpec",
    "DatasetError",
    "MissingCell",
    "UnknownVariable",
    "NegativeValue",
    "DuplicateTriple",
    "NoInputOrNoOutput",
    "SchemaError",
    "DataFormatError",
    "load_schema",
    "load_dataset",
    "dump_dataset",
    "dump_schema",
    "generate_synthetic",
    "parse_generator_spec",
]


class VariableRole(Enum):
    """Role a variable plays in the efficiency model."""

    INPUT = "input"
    OUTPUT = "output"
    GOOD_LINK = "good_link"
    BAD_LINK = "bad_link"

    @classmethod
    def parse(cls, text: str) -> "VariableRole":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown variable role {text!r}") from None


class Variable(NamedTuple):
    name: str
    role: VariableRole


class DatasetError(Exception):
    """Base class for panel load/validation failures."""


class MissingCell(DatasetError):
    """A (dmu, period, variable) triple has no value in the data file."""

    def __init__(self, dmu: str, period: str, variable: str):
        super().__init__(f"missing value for ({dmu}, {period}, {variable})")
        self.dmu, self.period, self.variable = dmu, period, variable


class UnknownVariable(DatasetError):
    """A data row names a variable that the schema does not declare."""

    def __init__(self, variable: str, line: int):
        super().__init__(f"line {line}: variable {variable!r} not in schema")
        self.variable, self.line = variable, line


class NegativeValue(DatasetError):
    def __init__(self, dmu: str, period: str, variable: str, value: float):
        super().__init__(
            f"negative value {value!r} for ({dmu}, {period}, {variable})"
        )
        self.dmu, self.period, self.variable, self.value = dmu, period, variable, value


class DuplicateTriple(DatasetError):
    def __init__(self, dmu: str, period: str, variable: str, line: int):
        super().__init__(f"line {line}: duplicate row for ({dmu}, {period}, {variable})")
        self.dmu, self.period, self.variable, self.line = dmu, period, variable, line


class NoInputOrNoOutput(DatasetError):
    def __init__(self, m: int, s: int):
        super().__init__(f"dataset needs >=1 input and >=1 output, got {m} and {s}")
        self.m, self.s = m, s


class SchemaError(DatasetError):
    """Malformed schema or generator-spec file; carries the offending line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DataFormatError(DatasetError):
    """Structurally malformed data CSV (bad header, field count, non-numeric value)."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class PanelDataset:
    """Immutable DMU x period x variable tensor with role metadata.

    Parameters
    ----------
    dmu_ids : ordered unique identifiers, length n
    periods : ordered period labels (strictly ascending), length T
    variables : ordered (name, role) pairs, length V
    values : array-like of shape (n, T, V), finite and non-negative

    Safe to share read-only across concurrent evaluators.
    """

    def __init__(
        self,
        dmu_ids: Sequence[str],
        periods: Sequence[str],
        variables: Sequence[Variable],
        values,
    ):
        self.dmu_ids = tuple(str(d) for d in dmu_ids)
        self.periods = tuple(str(p) for p in periods)
        self.variables = tuple(Variable(str(n), VariableRole(r)) for n, r in variables)

        if not self.dmu_ids:
            raise ValueError("dataset needs at least one DMU")
        if len(set(self.dmu_ids)) != len(self.dmu_ids):
            raise ValueError("dmu ids are not unique")
        if not self.periods:
            raise ValueError("dataset needs at least one period")
        if any(a >= b for a, b in zip(self.periods, self.periods[1:])):
            raise ValueError("period labels must be strictly ascending")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names are not unique")

        arr = np.array(values, dtype=float)
        expect = (len(self.dmu_ids), len(self.periods), len(self.variables))
        if arr.shape != expect:
            raise ValueError(f"values shape {arr.shape} != {expect}")
        if np.isnan(arr).any():
            j, t, i = map(int, np.argwhere(np.isnan(arr))[0])
            raise MissingCell(self.dmu_ids[j], self.periods[t], self.variables[i].name)
        if not np.isfinite(arr).all():
            raise ValueError("values must be finite")
        if (arr < 0).any():
            j, t, i = map(int, np.argwhere(arr < 0)[0])
            raise NegativeValue(
                self.dmu_ids[j], self.periods[t], self.variables[i].name, arr[j, t, i]
            )
        arr.setflags(write=False)
        self.values = arr

        self._dmu_pos = {d: j for j, d in enumerate(self.dmu_ids)}
        self._var_pos = {v.name: i for i, v in enumerate(self.variables)}
        by_role = {role: [] for role in VariableRole}
        for i, v in enumerate(self.variables):
            by_role[v.role].append(i)
        self._role_idx = {role: tuple(idx) for role, idx in by_role.items()}

        m = len(self._role_idx[VariableRole.INPUT])
        s = len(self._role_idx[VariableRole.OUTPUT])
        if m < 1 or s < 1:
            raise NoInputOrNoOutput(m, s)

    @property
    def n_dmus(self) -> int:
        return len(self.dmu_ids)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def role_indices(self, role: VariableRole) -> tuple:
        """Positions (in variable order) of all variables with the given role."""
        return self._role_idx[role]

    def role_count(self, role: VariableRole) -> int:
        return len(self._role_idx[role])

    def dmu_index(self, dmu_id: str) -> int:
        try:
            return self._dmu_pos[dmu_id]
        except KeyError:
            raise KeyError(f"unknown dmu id {dmu_id!r}") from None

    def value(self, dmu_id: str, period: str, variable: str) -> float:
        return float(
            self.values[
                self.dmu_index(dmu_id),
                self.periods.index(period),
                self._var_pos[variable],
            ]
        )

    def with_scaled_variable(self, variable: str, factor: float) -> "PanelDataset":
        """Copy with one variable column multiplied by `factor` everywhere."""
        i = self._var_pos[variable]
        vals = self.values.copy()
        vals[:, :, i] *= factor
        return PanelDataset(self.dmu_ids, self.periods, self.variables, vals)


def load_schema(path) -> tuple:
    """Parse a schema file: one `variable_name=role` per line, `#` comments.

    Returns the variables in file order. Raises SchemaError with the
    offending line number on any syntax problem.
    """
    variables = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(lineno, f"expected 'name=role', got {line!r}")
            name, _, role_text = line.partition("=")
            name = name.strip()
            if not name:
                raise SchemaError(lineno, "empty variable name")
            if name in seen:
                raise SchemaError(lineno, f"duplicate variable {name!r}")
            try:
                role = VariableRole.parse(role_text)
            except ValueError as exc:
                raise SchemaError(lineno, str(exc)) from None
            seen.add(name)
            variables.append(Variable(name, role))
    if not variables:
        raise SchemaError(0, "schema declares no variables")
    return tuple(variables)


_CSV_HEADER = ["dmu", "period", "variable", "value"]


def load_dataset(data_path, schema_path) -> PanelDataset:
    """Load and validate a long-format CSV against a role schema.

    The data file is `dmu,period,variable,value`, one triple per row, and
    must be complete: every (dmu, period, variable) cell present exactly
    once. Variable order follows the schema file; periods sort ascending
    by label; DMUs keep first-appearance order.
    """
    variables = load_schema(schema_path)
    var_pos = {v.name: i for i, v in enumerate(variables)}

    cells = {}
    dmu_order = {}
    period_set = set()
    with open(data_path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _CSV_HEADER:
            raise DataFormatError(1, f"expected header {','.join(_CSV_HEADER)!r}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError(lineno, f"expected 4 fields, got {len(row)}")
            dmu, period, name, text = (cell.strip() for cell in row)
            if name not in var_pos:
                raise UnknownVariable(name, lineno)
            try:
                value = float(text)
            except ValueError:
                raise DataFormatError(lineno, f"non-numeric value {text!r}") from None
            if not np.isfinite(value):
                raise DataFormatError(lineno, f"non-finite value {text!r}")
            if value < 0:
                raise NegativeValue(dmu, period, name, value)
            key = (dmu, period, name)
            if key in cells:
                raise DuplicateTriple(dmu, period, name, lineno)
            cells[key] = value
            dmu_order.setdefault(dmu, len(dmu_order))
            period_set.add(period)

    if not cells:
        raise DataFormatError(1, "no data rows")
    dmu_ids = sorted(dmu_order, key=dmu_order.get)
    periods = sorted(period_set)

    values = np.full((len(dmu_ids), len(periods), len(variables)), np.nan)
    for (dmu, period, name), v in cells.items():
        values[dmu_order[dmu], periods.index(period), var_pos[name]] = v
    for j, dmu in enumerate(dmu_ids):
        for t, period in enumerate(periods):
            for i, var in enumerate(variables):
                if np.isnan(values[j, t, i]):
                    raise MissingCell(dmu, period, var.name)

    return PanelDataset(dmu_ids, periods, variables, values)


def dump_dataset(data: PanelDataset, path) -> None:
    """Write the canonical long CSV: dmu-major, period, then variable order.

    Values are formatted to 12 significant digits, so load -> dump is
    stable byte-for-byte.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for j, dmu in enumerate(data.dmu_ids):
            for t, period in enumerate(data.periods):
                for i, var in enumerate(data.variables):
                    writer.writerow(
                        [dmu, period, var.name, format(data.values[j, t, i], ".12g")]
                    )


def dump_schema(variables: Iterable[Variable], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for var in variables:
            fh.write(f"{var.name}={var.role.value}\n")


@dataclass(frozen=True)
class VariableSpec:
    """One variable of a synthetic panel: role plus a uniform draw interval.

    The variance target is advisory calibration metadata; draws are checked
    against the interval only.
    """

    name: str
    role: VariableRole
    low: float
    high: float
    variance_target: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high)):
            raise ValueError(f"{self.name}: bounds must be finite")
        if self.low > self.high:
            raise ValueError(f"{self.name}: low {self.low} > high {self.high}")


@dataclass(frozen=True)
class GeneratorSpec:
    """Deterministic recipe for a synthetic panel."""

    variables: tuple
    dmu_count: int
    period_count: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.dmu_count < 1:
            raise ValueError("dmu_count must be >= 1")
        if self.period_count < 1:
            raise ValueError("period_count must be >= 1")
        if not self.variables:
            raise ValueError("generator spec declares no variables")


def generate_synthetic(spec: GeneratorSpec) -> PanelDataset:
    """Draw a panel with values independent uniform per variable interval.

    Identical specs produce bit-identical datasets: the PRNG is seeded from
    spec.seed alone and variables are drawn in declaration order.
    """
    rng = np.random.default_rng(spec.seed)
    n, T = spec.dmu_count, spec.period_count
    wd = len(str(n))
    wt = len(str(T))
    dmu_ids = [f"d{j:0{wd}d}" for j in range(1, n + 1)]
    periods = [f"t{t:0{wt}d}" for t in range(1, T + 1)]
    values = np.empty((n, T, len(spec.variables)))
    for i, var in enumerate(spec.variables):
        values[:, :, i] = rng.uniform(var.low, var.high, size=(n, T))
    variables = [Variable(v.name, v.role) for v in spec.variables]
    return PanelDataset(dmu_ids, periods, variables, values)


def parse_generator_spec(path) -> GeneratorSpec:
    """Parse a generator spec file.

    Line grammar (`#` starts a comment line):
      dmus = <int>
      periods = <int>
      seed = <int>
      <name> <role> <low> <high> [<variance_target>]
    """
    scalars = {}
    variables = []
    names = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                key, _, value = line.partition("=")
                key = key.strip().lower()
                if key not in ("dmus", "periods", "seed"):
                    raise SchemaError(lineno, f"unknown setting {key!r}")
                try:
                    scalars[key] = int(value.strip())
                except ValueError:
                    raise SchemaError(lineno, f"{key} must be an integer") from None
                continue
            parts = line.split()
            if len(parts) not in (4, 5):
                raise SchemaError(
                    lineno, "expected '<name> <role> <low> <high> [variance]'"
                )
            name = parts[0]
            if name in names:
                raise SchemaError(lineno, f"duplicate variable {name!r}")
            try:
                role = VariableRole.parse(parts[1])
            except ValueError as exc:
                raise SchemaError(lineno, str(exc)) from None
            try:
                low, high = float(parts[2]), float(parts[3])
                variance = float(parts[4]) if len(parts) == 5 else None
            except ValueError:
                raise SchemaError(lineno, "bounds must be numeric") from None
            try:
                variables.append(VariableSpec(name, role, low, high, variance))
            except ValueError as exc:
                raise SchemaError(lineno, str(exc)) from None
            names.add(name)

    for key in ("dmus", "periods"):
        if key not in scalars:
            raise SchemaError(0, f"missing required setting '{key}'")
    if not variables:
        raise SchemaError(0, "spec declares no variables")
    try:
        return GeneratorSpec(
            variables=tuple(variables),
            dmu_count=scalars["dmus"],
            period_count=scalars["periods"],
            seed=scalars.get("seed", 0),
        )
    except ValueError as exc:
        raise SchemaError(0, str(exc)) from None
