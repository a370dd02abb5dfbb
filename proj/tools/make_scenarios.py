#!/usr/bin/env python3
"""Regenerate scenarios/*.json (desk-scale Dragonfly, 72 hosts)."""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

TOPO = {
    "groups": 9,
    "routers_per_group": 4,
    "hosts_per_router": 2,
    "global_links_per_router": 2,
    "local_link_gbps": 200,
    "global_link_gbps": 200,
    "local_latency_ns": 30,
    "global_latency_ns": 300,
}

# Desk-scale job shapes. Message sizes and compute gaps are shrunk from the
# full-machine defaults so a co-run finishes in a few hundred microseconds
# while keeping the motifs' relative intensity and peak-ingress ordering.
DESK = {
    "fft3d": (36, {"msg_bytes": 8192, "iterations": 3, "compute_ns": 20000}),
    "ur": (36, {"msg_bytes": 16384, "count": 100, "compute_ns": 500}),
    "lu": (36, {"msg_bytes": 4096, "iterations": 4, "compute_ns": 2000}),
    "halo3d": (36, {"msg_bytes": 65536, "iterations": 6, "compute_ns": 5000}),
    "lqcd": (36, {"msg_bytes": 32768, "iterations": 4, "compute_ns": 10000, "dims": [3, 3, 2, 2]}),
    "stencil5d": (32, {"msg_bytes": 200000, "iterations": 4, "compute_ns": 10000, "dims": [2, 2, 2, 2, 2]}),
    "cosmoflow": (36, {"msg_bytes": 131072, "interval_ns": 50000, "rounds": 2}),
    "dl": (36, {"msg_bytes": 131072, "interval_ns": 10638, "rounds": 8}),
    "lulesh": (27, {"stencil_bytes": 16384, "sweep_bytes": 2048, "iterations": 3, "compute_ns": 10000}),
}

TARGETS = ["fft3d", "lu", "lqcd", "cosmoflow", "stencil5d", "lulesh"]
BACKGROUNDS = ["ur", "lu", "fft3d", "halo3d", "cosmoflow", "dl"]


def job(motif, ranks=None, **over):
    n, params = DESK[motif]
    params = dict(params, **over)
    return {"motif": motif, "ranks": ranks or n, "params": params}


def scenario(name, jobs, description, routing="par", **extra):
    s = {"name": name, "description": description, "topology": TOPO, "routing": routing, "seed": 1,
         "jobs": jobs}
    s.update(extra)
    return s


def main():
    OUT.mkdir(exist_ok=True)
    out = {}
    for t in TARGETS:
        out[f"pairwise_{t}_none"] = scenario(f"pairwise_{t}_none", [job(t)], f"{t} alone")
        for b in BACKGROUNDS:
            if b == t:
                continue
            out[f"pairwise_{t}_{b}"] = scenario(f"pairwise_{t}_{b}", [job(t), job(b)],
                                                f"{t} (job 0) co-run with {b} (job 1)")
    out["bully_lqcd_stencil5d"] = scenario(
        "bully_lqcd_stencil5d", [job("lqcd"), job("stencil5d")],
        "LQCD (job 0) next to the high peak-ingress Stencil5D (job 1)")
    for quiet, name in ((1, "bully_lqcd_alone"), (0, "bully_stencil5d_alone")):
        jobs = [job("lqcd"), job("stencil5d")]
        jobs[quiet]["silent"] = True
        out[name] = scenario(name, jobs, "bully pair with one job silenced, same placement as the co-run")
    out["mixed"] = scenario(
        "mixed",
        [job("fft3d", 9), job("cosmoflow", 9), job("lu", 9), job("ur", 9),
         job("lqcd", 18, dims=[3, 3, 2, 1]), job("stencil5d", 16, dims=[2, 2, 2, 2, 1])],
        "six-job mix proportioned like the production-machine mix, 70 of 72 hosts")
    out["adversarial_shift"] = scenario(
        "adversarial_shift",
        [{"motif": "permutation", "ranks": 72, "placement": "contiguous",
          "params": {"msg_bytes": 512, "count": 200, "shift": 8}}],
        "every host sends to the same-index host of the next group", routing="min")
    for name, s in out.items():
        (OUT / f"{name}.json").write_text(json.dumps(s, indent=1) + "\n")
    print(f"wrote {len(out)} scenarios to {OUT}")


if __name__ == "__main__":
    main()
