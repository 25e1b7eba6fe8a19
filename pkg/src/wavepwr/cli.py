"""``wavepwr`` command line: generate, cluster, decompose, uq.

All randomness derives from ``--seed``. Each consumer gets its own stream,
``SeedSequence(seed, spawn_key=(k,))`` with ``k`` fixed per stream name (see
``STREAMS``), so adding or reordering work never shifts another stream.
"""
import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import io
from .dynet import decompose
from .generators import expected_edges, kuramoto_benchmark, planted_partition
from .graph import build_normalized_laplacian, dense_spectrum, partition_agreement, sign_cluster
from .pipeline import spectral_decomposition
from .pwr import (Functional, cost_estimate, histogram, histogram_l1, mc_reference, parameter_samples,
                  pwr_solve, summarize_samples)
from .wave import WaveConfig, extract_modes, node_spectra, wave_run

STREAMS = {"graph": 0, "model": 1, "wave": 2, "sampler": 3}


def derive_seed(seed, stream):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[stream],))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


class CliError(RuntimeError):
    pass


def _need_seed(args, what):
    if args.seed is None:
        raise CliError(f"--seed is required for {what}")
    return args.seed


def _config(args, schema):
    if not args.config:
        return {}
    return io.load_config(args.config, schema)


def _safe(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


# ------------------------------------------------------------------ generate

GENERATE_SCHEMA = {"generate": {
    "kind": str, "blocks": io.int_list, "p_in": float, "p_out": float, "pairs": int, "intra": float,
    "inter": float, "rel_sigma": float, "band": float, "T": float, "dt": float,
    "states_per_subsystem": int, "inner": float, "coupling_strength": float,
}}


def cmd_generate(args):
    cfg = _config(args, GENERATE_SCHEMA).get("generate", {})
    kind = args.kind or cfg.get("kind")
    if kind is None:
        raise CliError("generate needs a kind (--kind or generate.kind)")
    out = io.OutputDir(args.out)
    if kind == "planted-partition":
        seed = _need_seed(args, "generate")
        blocks = cfg.get("blocks", [680, 320])
        p_in, p_out = cfg.get("p_in", 0.3), cfg.get("p_out", 0.01)
        g, truth = planted_partition(blocks, p_in, p_out, derive_seed(seed, "graph"))
        with out:
            out.write("graph.edges", io.format_edges(g))
            out.write("truth.json", io.dumps_json({"labels": truth.tolist()}))
            out.write("generate.json", io.dumps_json({
                "kind": kind, "n": g.n, "edges": g.edge_count(),
                "expected_edges": expected_edges(blocks, p_in, p_out), "blocks": blocks,
                "p_in": p_in, "p_out": p_out, "seed": seed}))
        print(f"planted partition: n={g.n} edges={g.edge_count()}")
    elif kind == "kuramoto":
        seed = _need_seed(args, "generate")
        model, params, truth = kuramoto_benchmark(
            cfg.get("pairs", 40), cfg.get("intra", 1.0), cfg.get("inter", 0.05),
            derive_seed(seed, "model"), cfg.get("rel_sigma", 0.2), cfg.get("band", 1.0))
        spec = ["[model]", "kind = kuramoto", f"n = {model.n}", "coupling = coupling.txt",
                "omega = " + ", ".join(repr(float(v)) for v in model.nominal_params),
                "x0 = " + ", ".join(repr(float(v)) for v in model.x0), "", "[uncertain]"]
        spec += [f"{p.index} = {io.format_param(p)}" for p in params]
        spec += ["", "[time]", "t0 = 0.0", f"T = {cfg.get('T', 0.5)!r}", f"dt = {cfg.get('dt', 0.01)!r}"]
        with out:
            out.write("coupling.txt", io.format_matrix(model.coupling))
            out.write("model.ini", "\n".join(spec) + "\n")
            out.write("truth.json", io.dumps_json({"labels": truth.tolist()}))
        print(f"kuramoto: {model.n} oscillators, {len(params)} uncertain frequencies")
    elif kind == "chain3":
        lines = ["[model]", "kind = chain3",
                 f"states_per_subsystem = {cfg.get('states_per_subsystem', 2)}",
                 f"inner = {cfg.get('inner', 0.5)!r}",
                 f"coupling_strength = {cfg.get('coupling_strength', 0.01)!r}", "", "[uncertain]",
                 "0 = uniform lo=1.0 hi=2.0", "1 = uniform lo=1.0 hi=2.0", "2 = uniform lo=1.0 hi=2.0",
                 "", "[time]", "t0 = 0.0", f"T = {cfg.get('T', 1.0)!r}", f"dt = {cfg.get('dt', 0.01)!r}"]
        with out:
            out.write("model.ini", "\n".join(lines) + "\n")
    else:
        raise CliError(f"unknown generator kind {kind!r}")
    return 0


# ------------------------------------------------------------------ cluster

CLUSTER_SCHEMA = {"wave": {"c": float, "t_max": int, "k": int, "eta": float}}


def cmd_cluster(args):
    cfg = _config(args, CLUSTER_SCHEMA).get("wave", {})
    g = io.read_graph(args.graph)
    L = build_normalized_laplacian(g)
    k = cfg.get("k", 1)
    report = {"n": g.n, "edges": g.edge_count(), "k": k}
    extra = {}
    if args.oracle:
        spec = dense_spectrum(L, k + 1)
        assignment = sign_cluster(spec.eigenvectors[:, 1:k + 1])
        report.update(method="oracle", eigenvalues=[float(v) for v in spec.eigenvalues[1:]])
    else:
        seed = _need_seed(args, "the wave path")
        wcfg = WaveConfig(c=cfg.get("c", 1.4), t_max=cfg.get("t_max"), k=k, eta=cfg.get("eta", 8.0),
                          seed=derive_seed(seed, "wave"))
        trace = wave_run(L, wcfg)
        modes = extract_modes(trace, k)
        assignment = sign_cluster(modes.amplitudes)
        report.update(method="wave", c=wcfg.c, t_max=trace.t_max,
                      theta=[float(v) for v in modes.theta],
                      eigenvalues=[float(v) for v in modes.eigenvalues])
        if args.spectra:
            freqs, Y = node_spectra(trace)
            extra["spectrum.csv"] = io.format_csv(["theta", "magnitude"], [freqs, Y.sum(axis=0)])
            extra["node_spectra.csv"] = io.format_csv(
                ["node"] + [f"bin{b}" for b in range(Y.shape[1])],
                [np.arange(g.n)] + [Y[:, b] for b in range(Y.shape[1])])
    report["clusters"] = assignment.n_clusters
    if args.truth:
        truth = json.loads(Path(args.truth).read_text(encoding="utf-8"))["labels"]
        report["agreement"] = float(partition_agreement(assignment.labels, truth))
    with io.OutputDir(args.out) as out:
        out.write("assignment.json", io.dumps_json(assignment.to_json()))
        out.write("report.json", io.dumps_json(report))
        for name, text in extra.items():
            out.write(name, text)
    msg = f"{report['method']}: {assignment.n_clusters} clusters"
    if "agreement" in report:
        msg += f", agreement {report['agreement']:.4f}"
    print(msg)
    return 0


# ------------------------------------------------------------------ decompose

DECOMPOSE_SCHEMA = {"decompose": {"horizon": float, "dt": float, "gap_mode": str}}


def cmd_decompose(args):
    cfg = _config(args, DECOMPOSE_SCHEMA).get("decompose", {})
    spec = io.load_model_spec(args.model)
    horizon = args.horizon or cfg.get("horizon", 10.0)
    res = spectral_decomposition(spec.model, horizon, spec.t0, cfg.get("dt", spec.dt),
                                 cfg.get("gap_mode", "absolute"))
    s = res.spectrum
    report = {"n": spec.model.n, "horizon": horizon, "gap_index": s.gap_index,
              "gap_ratio": s.gap_ratio, "zero_multiplicity": s.zero_multiplicity,
              "clusters": res.n_clusters, "degenerate": list(s.degenerate)}
    truth = spec.truth
    if args.truth:
        truth = json.loads(Path(args.truth).read_text(encoding="utf-8"))["labels"]
    if truth is not None:
        report["agreement"] = float(partition_agreement(res.labels, truth))
    with io.OutputDir(args.out) as out:
        out.write("clusters.json", io.dumps_json({"k": res.n_clusters, "labels": res.labels.tolist(),
                                                  "gap_index": s.gap_index}))
        out.write("spectrum.csv", io.format_csv(["index", "eigenvalue"],
                                                [np.arange(1, s.eigenvalues.size + 1), s.eigenvalues]))
        out.write("report.json", io.dumps_json(report))
    print(f"gap_index = {s.gap_index}; {res.n_clusters} clusters; zero multiplicity {s.zero_multiplicity}")
    return 0


# ------------------------------------------------------------------ uq

UQ_SCHEMA = {
    "job": {"model": str, "decomposition": str, "method": str, "l_s": int, "l_c": int, "P": int,
            "I_max": int, "tol": float, "functionals": io.str_list, "horizon": float},
    "sampler": {"kind": str, "samples": int, "bins": int},
    "cost": {"l": int},
}


def cmd_uq(args):
    if not args.config:
        raise CliError("uq needs a job file (--config)")
    cfg = io.load_config(args.config, UQ_SCHEMA, required=[("job", "model")])
    job, smp = cfg["job"], cfg.get("sampler", {})
    base = Path(args.config).parent
    spec = io.load_model_spec(base / job["model"])
    model, params = spec.model, spec.params
    if not params:
        raise CliError("model has no uncertain parameters")
    method = job.get("method", "both")
    if method not in ("pwr", "mc", "both"):
        raise CliError(f"unknown method {method!r}")
    sampler = args.sampler or smp.get("kind", "sobol")
    n_samples = args.samples or smp.get("samples", 10000)
    bins = smp.get("bins", 30)
    seed = _need_seed(args, "uq") if (sampler == "pseudo") else (args.seed or 0)
    sseed = derive_seed(seed, "sampler")
    names = job.get("functionals") or [f"state:{i}" for i in range(model.n)]
    functionals = [Functional.parse(f) for f in names]
    l_s, l_c, I_max = job.get("l_s", 5), job.get("l_c", 2), job.get("I_max", 10)
    window = dict(t0=spec.t0, T=spec.T, dt=spec.dt)

    files, report = {}, {"model": model.name, "n": model.n, "uncertain": len(params),
                         "sampler": sampler, "samples": n_samples}
    results = {}
    decomp = None
    if method in ("pwr", "both"):
        src = job.get("decomposition", "auto")
        if src == "auto":
            labels = spectral_decomposition(model, job.get("horizon", 10.0), spec.t0, spec.dt).labels
        else:
            labels = json.loads((base / src).read_text(encoding="utf-8"))["labels"]
        decomp = decompose(model, np.asarray(labels))
        rep = pwr_solve(model, decomp, params, l_s, l_c, job.get("P"), I_max, job.get("tol", 1e-6), **window)
        xi = parameter_samples(model, params, n_samples, sampler, sseed)
        series, values = summarize_samples(rep.sample_states(xi), rep.times, functionals)
        # state moments come straight from the coefficients
        mean, var = rep.mean(), rep.variance()
        for f in functionals:
            if f.kind == "state" and f.at is None:
                series[f.name] = (mean[:, f.index], var[:, f.index])
        results["pwr"] = (rep.times, series, values)
        report["pwr"] = rep.to_json()
        report["pwr"]["subsystems"] = len(decomp)
    if method in ("mc", "both"):
        mc = mc_reference(model, params, n_samples, sseed, sampler, functionals=functionals, **window)
        results["mc"] = (mc.times, mc.series, mc.values)

    for tag, (times, series, values) in results.items():
        header, cols = ["t"], [times]
        for name, (m, v) in series.items():
            header += [f"{name}_mean", f"{name}_var"]
            cols += [m, v]
        files[f"moments_{tag}.csv"] = io.format_csv(header, cols)
        for name, vals in values.items():
            if len(results) == 2:
                other = results["mc" if tag == "pwr" else "pwr"][2][name]
                rng = (min(vals.min(), other.min()), max(vals.max(), other.max()))
            else:
                rng = None
            lo, hi, cnt = histogram(vals, bins, rng)
            files[f"hist_{tag}_{_safe(name)}.csv"] = io.format_csv(["bin_lo", "bin_hi", "count"], [lo, hi, cnt])
    if len(results) == 2:
        cmp = {}
        for name in results["pwr"][1]:
            a, b = results["pwr"][1][name][0], results["mc"][1][name][0]
            cmp[f"{name}_mean_max_rel_diff"] = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
        for name in results["pwr"][2]:
            cmp[f"{name}_hist_l1"] = histogram_l1(results["pwr"][2][name], results["mc"][2][name], bins)
        report["comparison"] = cmp

    l_full = cfg.get("cost", {}).get("l", 2)
    if decomp is None:
        labels = spectral_decomposition(model, job.get("horizon", 10.0), spec.t0, spec.dt).labels
        decomp = decompose(model, labels)
    R_F, R_I, ratio = cost_estimate(decomp, l_full, l_s, l_c, I_max, params)
    report["cost"] = {"l": l_full, "l_s": l_s, "l_c": l_c, "I_max": I_max, "R_F": R_F, "R_I": R_I, "ratio": ratio}
    files["report.json"] = io.dumps_json(report)
    with io.OutputDir(args.out) as out:
        for name, text in files.items():
            out.write(name, text)
    print(f"cost: R_F = {float(R_F):.4e} ({l_full}^{len(params)}), R_I = {R_I}, R_F/R_I = {ratio:.4e}")
    if "pwr" in report:
        print(f"pwr: {report['pwr']['iterations']} iterations, converged={report['pwr']['converged']}")
    return 0


# ------------------------------------------------------------------ entry point

def build_parser():
    ap = argparse.ArgumentParser(prog="wavepwr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI-style config file")
        p.add_argument("--seed", type=int, help="root seed (u64)")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("generate", help="write a benchmark graph or model")
    common(p)
    p.add_argument("--kind", choices=["planted-partition", "kuramoto", "chain3"])
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cluster", help="cluster a graph with the wave method or the dense oracle")
    common(p)
    p.add_argument("graph")
    p.add_argument("--oracle", action="store_true", help="use the dense eigensolver")
    p.add_argument("--truth", help="ground-truth labels JSON")
    p.add_argument("--spectra", action="store_true", help="also write spectrum CSVs")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("decompose", help="split a model into weakly coupled subsystems")
    common(p)
    p.add_argument("model")
    p.add_argument("--horizon", type=float, help="averaging window for the Jacobian")
    p.add_argument("--truth", help="ground-truth labels JSON")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("uq", help="run PWR and/or Monte Carlo for a job file")
    common(p)
    p.add_argument("--sampler", choices=["pseudo", "sobol"])
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_uq)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CliError, io.ConfigError, ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
