"""End-to-end mini benchmark: both methods over all overlap bins.

Produces the same aggregate table the CLI's `report` subcommand emits:
success rate and consistency over successful registrations, recall, and
RRE/RTE over correctly recalled pairs, per effective-overlap bin.
Takes a couple of minutes on one core.
"""

from mbesbench import TerrainConfig, build_submaps, generate_terrain_pings, split_dataset
from mbesbench.bench import (Params, aggregate_reports, format_report,
                             preprocess_submaps, run_benchmark)
from mbesbench.pairgen import enumerate_pairs, gt_for_spec

cfg = TerrainConfig(seed=42, components=((100.0, 5.0),), roughness_sigma=0.2)
n_pings = 100 + 20 * 13
tensor = generate_terrain_pings(cfg, n_pings, 36, swath_width=90.0, along_track_step=2.5)
params = Params()
submaps = preprocess_submaps(build_submaps(tensor), params)
manifest = split_dataset(list(submaps.values()), {"all": (0, n_pings)})[0]

specs = enumerate_pairs(manifest, [1.0, 0.8, 0.6, 0.4, 0.2], base_seed=11)
pairs = [(s, gt_for_spec(s)) for s in specs]
print(f"{len(pairs)} pairs, methods: gicp, fpfh-ransac\n")

reports = []
for method in ("gicp", "fpfh-ransac"):
    outcomes = run_benchmark(submaps, pairs, method, params, seed=11)
    reports.extend(o.report for o in outcomes)
    n_ok = sum(o.report.success for o in outcomes)
    print(f"{method}: {n_ok}/{len(outcomes)} successful registrations")

print()
print(format_report(aggregate_reports(reports)))
