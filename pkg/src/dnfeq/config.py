"""Scenario files: sectioned key/value text describing one closed-loop model.

Example::

    [domain]
    dim = 1
    extent = 0, 1
    nodes = 101
    rule = trapezoid

    [population.1]
    tau = 1
    I_star = bump(amplitude=0.5, width=0.1, c0=0.3)
    activation = logistic(L=1, beta=4, theta=0.5)

    [kernel.11]
    family = gaussian(amplitude=2, width=0.1)

    [delay.1]
    family = distance_proportional(v=1, d_bar=2)

    [control]
    mode = proportional
    k = 1
    z_ref = affine(c0=0.3, c1=0.4)

Spatial fields accept a number, ``affine(c0, c1, c2)`` (``c0 + c1 r0 + c2 r1``)
or ``bump(amplitude, width, c0, c1, offset)``
(``offset + amplitude exp(-|r - c|^2 / (2 width^2))``). Missing kernel and
delay sections mean zero. Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import activations as act
from . import model as mdl
from .errors import ConfigError, DnfError
from .grid import assemble_kernel, build_domain
from .solver import SolverOptions


@dataclass(frozen=True)
class Call:
    """A family name with named float parameters, e.g. ``gaussian(amplitude=1, width=0.1)``."""

    name: str
    params: tuple = ()  # ((key, value), ...) in signature order

    def __getitem__(self, key):
        return dict(self.params)[key]

    def dumps(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}(" + ", ".join(f"{k}={_num(v)}" for k, v in self.params) + ")"


# family -> ordered (parameter, default); default None means required
ACTIVATIONS = {
    "logistic": (("L", 1.0), ("beta", 1.0), ("theta", 0.0)),
    "clamp": (("lo", 0.0), ("hi", 1.0), ("slope", 1.0)),
    "linear": (("slope", 1.0), ("offset", 0.0)),
    "relu": (),
}
KERNELS = {
    "zero": (),
    "constant": (("c", None),),
    "gaussian": (("amplitude", None), ("width", None)),
    "mexican_hat": (("a1", None), ("w1", None), ("a2", None), ("w2", None)),
}
DELAYS = {
    "zero": (),
    "constant": (("c", None),),
    "distance_proportional": (("v", None), ("d_bar", None)),
}
FIELDS = {
    "constant": (("c", None),),
    "affine": (("c0", None), ("c1", 0.0), ("c2", 0.0)),
    "bump": (("amplitude", None), ("width", None), ("c0", 0.0), ("c1", 0.0), ("offset", 0.0)),
}


def _num(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def parse_call(text: str, families: dict) -> Call:
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse {text!r}; expected name(param=value, ...)")
    name, body = m.group(1), m.group(2)
    if name not in families:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(families)}")
    sig = families[name]
    names = [p for p, _ in sig]
    given = {}
    if body is not None and body.strip():
        for pos, item in enumerate(body.split(",")):
            item = item.strip()
            if "=" in item:
                k, v = (s.strip() for s in item.split("=", 1))
            else:
                if pos >= len(names):
                    raise ValueError(f"{name} takes at most {len(names)} parameters")
                k, v = names[pos], item
            if k not in names:
                raise ValueError(f"{name} has no parameter {k!r}; expected {names}")
            if k in given:
                raise ValueError(f"{name}: parameter {k!r} given twice")
            given[k] = _float(v)
    params = []
    for k, default in sig:
        if k in given:
            params.append((k, given[k]))
        elif default is None:
            raise ValueError(f"{name} requires parameter {k!r}")
        else:
            params.append((k, default))
    return Call(name, tuple(params))


def _float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"not a finite number: {text!r}")
    return v


def parse_field(text: str) -> Call:
    try:
        return Call("constant", (("c", _float(text.strip())),))
    except ValueError:
        pass
    call = parse_call(text, FIELDS)
    if call.name == "bump" and not call["width"] > 0:
        raise ValueError("bump width must be > 0")
    return call


def _floats(n_allowed):
    def parse(text):
        vals = tuple(_float(s) for s in text.split(","))
        if len(vals) not in n_allowed:
            raise ValueError(f"expected {' or '.join(map(str, n_allowed))} comma-separated numbers")
        return vals
    return parse


def _ints(text):
    vals = []
    for s in text.split(","):
        v = _float(s)
        if v != int(v):
            raise ValueError(f"not an integer: {s.strip()!r}")
        vals.append(int(v))
    if len(vals) not in (1, 2):
        raise ValueError("expected 1 or 2 node counts")
    return tuple(vals)


def _int(text):
    v = _float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"{t!r} is not one of {list(options)}")
        return t
    return parse


def _nonneg(text):
    v = _float(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _positive(text):
    v = _float(text)
    if not v > 0:
        raise ValueError("must be > 0")
    return v


def _optional_positive(text):
    return None if text.strip().lower() == "none" else _positive(text)


_POP = {
    "tau": (parse_field, "1"),
    "I_star": (parse_field, "0"),
    "activation": (lambda t: parse_call(t, ACTIVATIONS), None),
}

# section -> key -> (parser, default text); default None means required
SCHEMA = {
    "domain": {
        "dim": (_choice("1", "2"), "1"),
        "extent": (_floats((2, 4)), None),
        "nodes": (_ints, None),
        "rule": (_choice("midpoint", "trapezoid"), "trapezoid"),
    },
    "population.1": dict(_POP),
    "population.2": dict(_POP),
    **{f"kernel.{i}{j}": {"family": (lambda t: parse_call(t, KERNELS), "zero")}
       for i in (1, 2) for j in (1, 2)},
    **{f"delay.{j}": {"family": (lambda t: parse_call(t, DELAYS), "zero")} for j in (1, 2)},
    "control": {
        "mode": (_choice(*mdl.MODES), "open_loop"),
        "k": (_nonneg, "0"),
        "k_P": (_nonneg, "0"),
        "k_I": (_nonneg, "0"),
        "alpha": (parse_field, "1"),
        "z_ref": (parse_field, "0"),
    },
    "solver": {
        "max_iterations": (_int, "10000"),
        "tol_res": (_positive, "1e-10"),
        "damping": (_positive, "0.5"),
        "anderson_depth": (_int, "5"),
        "inner_tol": (_optional_positive, "none"),
        "multistart": (_int, "1"),
        "seed": (_int, "0"),
    },
    "simulation": {
        "dt": (_positive, "0.001"),
        "t_end": (_positive, "10"),
        "method": (_choice("euler", "heun"), "euler"),
        "stride": (_int, "100"),
        "prehistory_1": (parse_field, "0"),
        "prehistory_2": (parse_field, "0"),
    },
}
REQUIRED_SECTIONS = ("domain", "population.1", "population.2")

# numeric keys that ``sweep`` may vary
SWEEPABLE = ("control.k", "control.k_P", "control.k_I", "solver.damping", "solver.tol_res",
             "solver.anderson_depth", "solver.max_iterations")


def _dump_value(v) -> str:
    if isinstance(v, Call):
        return v.dumps()
    if isinstance(v, tuple):
        return ", ".join(_num(x) for x in v)
    if v is None:
        return "none"
    if isinstance(v, str):
        return v
    return _num(v)


@dataclass
class ScenarioConfig:
    values: dict  # {section: {key: parsed value}}
    lines: dict = field(default_factory=dict, compare=False)  # (section, key) -> line number
    source: str | None = field(default=None, compare=False)

    def get(self, path: str):
        section, key = path.rsplit(".", 1)
        return self.values[section][key]

    def line(self, section: str, key: str | None = None):
        return self.lines.get((section, key)) or self.lines.get((section, None))

    def with_value(self, path: str, text: str) -> "ScenarioConfig":
        """Copy with one key replaced by the parse of ``text``."""
        section, key = path.rsplit(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {path!r}")
        parser = SCHEMA[section][key][0]
        try:
            value = parser(text)
        except ValueError as e:
            raise ConfigError(f"{path}: {e}") from None
        values = {s: dict(kv) for s, kv in self.values.items()}
        values[section][key] = value
        return ScenarioConfig(values, dict(self.lines), self.source)

    def dumps(self) -> str:
        """Canonical text: every section and key, in schema order."""
        out = []
        for section, keys in SCHEMA.items():
            out.append(f"[{section}]")
            for key in keys:
                out.append(f"{key} = {_dump_value(self.values[section][key])}")
            out.append("")
        return "\n".join(out)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    # -- building ----------------------------------------------------------

    def _fail(self, section, key, msg):
        name = f"{section}.{key}" if key else section
        raise ConfigError(f"{name}: {msg}", self.line(section, key))

    def build_domain(self):
        d = self.values["domain"]
        dim = int(d["dim"])
        ext = d["extent"]
        if len(ext) != 2 * dim:
            self._fail("domain", "extent", f"need {2 * dim} numbers for dim = {dim}")
        nodes = d["nodes"]
        if len(nodes) == 1:
            nodes = nodes * dim
        if len(nodes) != dim:
            self._fail("domain", "nodes", f"need {dim} node counts")
        extent = [(ext[2 * i], ext[2 * i + 1]) for i in range(dim)]
        try:
            return build_domain(extent if dim == 2 else extent[0], nodes, d["rule"])
        except DnfError as e:
            key = "nodes" if "node" in str(e) else "extent"
            self._fail("domain", key, str(e))

    def build_model(self, domain=None) -> mdl.NeuralFieldModel:
        dom = domain or self.build_domain()
        v = self.values
        tau, I_star, S = [], [], []
        for p in (1, 2):
            sec = f"population.{p}"
            t = field_values(dom, v[sec]["tau"])
            if not np.all(t > 0):
                self._fail(sec, "tau", "must be > 0 at every node")
            tau.append(t)
            I_star.append(field_values(dom, v[sec]["I_star"]))
            call = v[sec]["activation"]
            try:
                S.append(act.Activation(call.name, dict(call.params)))
            except DnfError as e:
                self._fail(sec, "activation", str(e))
        kernels = []
        for i in (1, 2):
            row = []
            for j in (1, 2):
                sec = f"kernel.{i}{j}"
                try:
                    row.append(assemble_kernel(dom, kernel_function(v[sec]["family"])))
                except DnfError as e:
                    self._fail(sec, "family", str(e))
            kernels.append(row)
        delays = []
        for j in (1, 2):
            sec = f"delay.{j}"
            try:
                delays.append(delay_matrix(dom, v[sec]["family"]))
            except DnfError as e:
                self._fail(sec, "family", str(e))
        c = v["control"]
        alpha = field_values(dom, c["alpha"])
        if np.any(alpha < 0):
            self._fail("control", "alpha", "must be >= 0 at every node")
        ctrl = mdl.Controller(c["mode"], k=c["k"], k_P=c["k_P"], k_I=c["k_I"])
        return mdl.NeuralFieldModel(
            domain=dom, tau=np.stack(tau), I_star=np.stack(I_star), alpha=alpha,
            z_ref=field_values(dom, c["z_ref"]), kernels=kernels, delays=delays,
            activations=S, controller=ctrl,
        )

    def solver_options(self, seed: int | None = None) -> SolverOptions:
        s = dict(self.values["solver"])
        if seed is not None:
            s["seed"] = seed
        try:
            return SolverOptions(**s)
        except ValueError as e:
            key = next((k for k in s if k in str(e)), None)
            self._fail("solver", key, str(e))

    def simulation(self) -> dict:
        s = self.values["simulation"]
        if s["stride"] < 1:
            self._fail("simulation", "stride", "must be >= 1")
        return dict(s)


def field_values(domain, call: Call) -> np.ndarray:
    """Sample a field expression on the grid."""
    r = domain.nodes
    r0 = r[:, 0]
    r1 = r[:, 1] if domain.dim == 2 else np.zeros_like(r0)
    if call.name == "constant":
        return np.full(domain.size, call["c"])
    if call.name == "affine":
        return call["c0"] + call["c1"] * r0 + call["c2"] * r1
    if call.name == "bump":
        d2 = (r0 - call["c0"]) ** 2 + ((r1 - call["c1"]) ** 2 if domain.dim == 2 else 0.0)
        w = call["width"]
        return call["offset"] + call["amplitude"] * np.exp(-d2 / (2 * w * w))
    raise ConfigError(f"unknown field family {call.name!r}")


def kernel_function(call: Call):
    if call.name == "zero":
        return mdl.zero_kernel()
    if call.name == "constant":
        return mdl.constant_kernel(call["c"])
    if call.name == "gaussian":
        return mdl.gaussian_kernel(call["amplitude"], call["width"])
    return mdl.mexican_hat_kernel(call["a1"], call["w1"], call["a2"], call["w2"])


def delay_matrix(domain, call: Call) -> np.ndarray:
    if call.name == "zero":
        return mdl.zero_delay(domain)
    if call.name == "constant":
        if call["c"] < 0:
            raise ConfigError("constant delay must be >= 0")
        return mdl.constant_delay(domain, call["c"])
    if call["d_bar"] < 0:
        raise ConfigError("d_bar must be >= 0")
    return mdl.distance_delay(domain, call["v"], call["d_bar"])


def _locate(text: str) -> dict:
    """Line numbers of section headers and keys."""
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            lines.setdefault((section, None), no)
        elif section is not None and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            lines.setdefault((section, key), no)
    return lines


def loads(text: str, source: str | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",),
        delimiters=("=",), empty_lines_in_values=False, default_section="__none__",
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as e:
        raise ConfigError(str(e).replace("\n", " "), getattr(e, "lineno", None)) from None
    lines = _locate(text)
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)))
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", lines.get((section, key)))
    for section in REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (parse, default) in keys.items():
            if parser.has_option(section, key):
                raw = parser[section][key]
                where = lines.get((section, key))
            elif default is None:
                raise ConfigError(f"[{section}] is missing required key {key!r}",
                                  lines.get((section, None)))
            else:
                raw, where = default, None
            try:
                values[section][key] = parse(raw)
            except ValueError as e:
                raise ConfigError(f"{section}.{key}: {e}", where) from None
    return ScenarioConfig(values, lines, source)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return loads(text, str(path))
