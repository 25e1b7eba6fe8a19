"""Text formats: edge lists, dense matrices, INI-style configs, model specs, CSV/JSON output."""
import configparser
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dynet import chain3_builder, kuramoto_builder, linear_builder
from .gpc import RandomParam
from .graph import GraphError, WeightedGraph


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ graphs

def read_graph(path, allow_isolated=False):
    """Edge list (``n m`` then ``i j w`` lines) or dense matrix (``n`` then rows)."""
    path = Path(path)
    try:
        lines = [ln.split("#", 1)[0].split() for ln in path.read_text(encoding="utf-8").splitlines()]
    except OSError as err:
        raise GraphError(f"cannot read graph file {path}: {err}") from err
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphError(f"{path} is empty")
    try:
        if len(lines[0]) == 2:
            n, m = int(lines[0][0]), int(lines[0][1])
            rows = lines[1:]
            if len(rows) != m:
                raise GraphError(f"{path}: header says {m} edges, found {len(rows)}")
            edges = []
            for r in rows:
                if len(r) != 3:
                    raise GraphError(f"{path}: bad edge line {' '.join(r)!r}")
                edges.append((int(r[0]), int(r[1]), float(r[2])))
            return WeightedGraph.from_edges(n, edges, allow_isolated=allow_isolated)
        if len(lines[0]) == 1:
            return WeightedGraph(read_matrix(path), allow_isolated=allow_isolated)
    except ValueError as err:
        if isinstance(err, GraphError):
            raise
        raise GraphError(f"{path}: {err}") from err
    raise GraphError(f"{path}: unrecognised header {' '.join(lines[0])!r}")


def format_edges(g):
    i, j = np.nonzero(np.triu(g.weights, 1))
    out = [f"{g.n} {i.size}"]
    out += [f"{a} {b} {float(g.weights[a, b])!r}" for a, b in zip(i.tolist(), j.tolist())]
    return "\n".join(out) + "\n"


def read_matrix(path):
    rows = [ln.split() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    n = int(rows[0][0])
    M = np.array([[float(v) for v in r] for r in rows[1:]])
    if M.shape != (n, n):
        raise ValueError(f"{path}: expected {n}x{n} matrix, got {M.shape}")
    return M


def format_matrix(M):
    M = np.asarray(M, dtype=np.float64)
    return f"{M.shape[0]}\n" + "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in M)


# ------------------------------------------------------------------ config files

def load_config(path, schema, required=()):
    """Read an INI-style file and check it against ``schema``.

    ``schema`` maps section -> {key: converter}. Unknown sections or keys raise
    :class:`ConfigError`; so do missing ``(section, key)`` pairs in ``required``.
    """
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return check_sections({s: dict(cp[s]) for s in cp.sections()}, schema, required, str(path))


def check_sections(raw, schema, required=(), where="config"):
    out = {}
    for section, items in raw.items():
        if section not in schema:
            raise ConfigError(f"{where}: unknown section [{section}]")
        spec = schema[section]
        conv = {}
        for key, value in items.items():
            if key not in spec and "*" not in spec:
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
            fn = spec.get(key, spec.get("*"))
            try:
                conv[key] = fn(value)
            except (TypeError, ValueError) as err:
                raise ConfigError(f"{where}: bad value for {section}.{key}: {value!r} ({err})") from err
        out[section] = conv
    for section, key in required:
        if key not in out.get(section, {}):
            raise ConfigError(f"{where}: missing required key {section}.{key}")
    return out


def float_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


def int_list(text):
    return [int(v) for v in text.replace(",", " ").split()]


def str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def parse_distribution(text, index, nominal):
    """``gaussian sigma=...`` / ``gaussian rel=... [band=...]`` / ``uniform lo=... hi=...``."""
    parts = text.split()
    if not parts:
        raise ConfigError(f"empty distribution for parameter {index}")
    kind, kw = parts[0], {}
    for p in parts[1:]:
        k, _, v = p.partition("=")
        kw[k] = float(v)
    if kind == "gaussian":
        extra = set(kw) - {"mean", "sigma", "rel", "band"}
        if extra:
            raise ConfigError(f"unknown gaussian option(s) {sorted(extra)}")
        mean = kw.get("mean", nominal)
        if "sigma" in kw:
            sigma = kw["sigma"]
        elif "rel" in kw:
            sigma = kw["rel"] * abs(mean) / kw.get("band", 1.0)
        else:
            raise ConfigError("gaussian needs sigma= or rel=")
        return RandomParam.gaussian(index, mean, sigma)
    if kind == "uniform":
        if set(kw) != {"lo", "hi"}:
            raise ConfigError("uniform needs exactly lo= and hi=")
        return RandomParam.uniform(index, kw["lo"], kw["hi"])
    raise ConfigError(f"unsupported distribution {kind!r}")


MODEL_SCHEMA = {
    "model": {
        "kind": str, "n": int, "coupling": str, "omega": float_list, "x0": float_list,
        "decay": float_list, "param_of_state": int_list, "generator": str, "pairs": int,
        "intra": float, "inter": float, "seed": int, "rel_sigma": float, "band": float,
        "states_per_subsystem": int, "inner": float, "coupling_strength": float,
    },
    "uncertain": {"*": str},
    "time": {"t0": float, "T": float, "dt": float},
}


class ModelSpec:
    """A model plus its uncertain parameters and time window."""

    def __init__(self, model, params, t0=0.0, T=1.0, dt=0.01, truth=None):
        self.model = model
        self.params = list(params)
        self.t0, self.T, self.dt = t0, T, dt
        self.truth = truth


def load_model_spec(path):
    from .generators import kuramoto_benchmark

    path = Path(path)
    cfg = load_config(path, MODEL_SCHEMA, required=[("model", "kind")])
    m = cfg["model"]
    kind = m["kind"]
    base = path.parent
    truth = None
    allowed = {
        "kuramoto": {"kind", "n", "coupling", "omega", "x0", "generator", "pairs", "intra", "inter",
                     "seed", "rel_sigma", "band"},
        "linear": {"kind", "coupling", "decay", "param_of_state", "x0"},
        "chain3": {"kind", "states_per_subsystem", "inner", "coupling_strength", "decay", "x0"},
    }
    if kind not in allowed:
        raise ConfigError(f"{path}: unknown model kind {kind!r}")
    extra = set(m) - allowed[kind]
    if extra:
        raise ConfigError(f"{path}: keys {sorted(extra)} do not apply to kind {kind!r}")
    default_params = []
    if kind == "kuramoto":
        if m.get("generator"):
            if m["generator"] != "ring_of_pairs":
                raise ConfigError(f"unknown generator {m['generator']!r}")
            model, default_params, truth = kuramoto_benchmark(
                m.get("pairs", 40), m.get("intra", 1.0), m.get("inter", 0.05), m.get("seed", 0),
                m.get("rel_sigma", 0.2), m.get("band", 1.0))
            if "omega" in m or "x0" in m:
                model = kuramoto_builder(model.n, model.coupling, m.get("omega", model.nominal_params),
                                         x0=m.get("x0", model.x0))
        else:
            if "coupling" not in m or "omega" not in m:
                raise ConfigError(f"{path}: kuramoto needs coupling= and omega= (or generator=)")
            K = read_matrix(base / m["coupling"])
            n = m.get("n", K.shape[0])
            model = kuramoto_builder(n, K, m["omega"], x0=m.get("x0"))
    elif kind == "linear":
        C = read_matrix(base / m["coupling"])
        pos = m.get("param_of_state", list(range(C.shape[0])))
        model = linear_builder(C, pos, m["decay"], x0=m.get("x0"))
    else:
        model = chain3_builder(m.get("states_per_subsystem", 2), m.get("inner", 0.5),
                               m.get("coupling_strength", 0.01), m.get("decay", (1.5, 1.5, 1.5)), x0=m.get("x0"))
        truth = model.truth
    params = list(default_params) if "uncertain" not in cfg else []
    for key, text in cfg.get("uncertain", {}).items():
        try:
            idx = int(key)
        except ValueError as err:
            raise ConfigError(f"{path}: uncertain keys must be parameter indices, got {key!r}") from err
        if not 0 <= idx < model.p:
            raise ConfigError(f"{path}: parameter index {idx} out of range")
        params.append(parse_distribution(text, idx, model.nominal_params[idx]))
    params.sort(key=lambda p: p.index)
    t = cfg.get("time", {})
    return ModelSpec(model, params, t.get("t0", 0.0), t.get("T", 1.0), t.get("dt", 0.01), truth)


def format_param(p):
    if p.kind == "gaussian":
        return f"gaussian mean={p.a!r} sigma={p.b!r}"
    return f"uniform lo={p.a!r} hi={p.b!r}"


# ------------------------------------------------------------------ output

def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def format_csv(header, columns):
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


class OutputDir:
    """Collects artifacts; files are written atomically and removed if the run fails."""

    def __init__(self, root):
        self.root = Path(root)
        self.written = []

    def __enter__(self):
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def write(self, name, text):
        target = self.root / name
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(target)
        return target

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.written:
                try:
                    p.unlink()
                except FileNotFoundError:
                    pass
        return False
