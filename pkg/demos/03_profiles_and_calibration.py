"""Benchmark two backends, draw performance profiles and calibrate threads.

A profile curve counts, for each time threshold, how many problems a
backend solved within that time.  The virtual best takes the fastest
solved time per problem over all backends; the virtual worst takes the
slowest and only counts problems every backend solved.  Calibration
repeats one solve per worker count and keeps the fastest mean.

Run with ``python demos/03_profiles_and_calibration.py [out_dir]``.
"""
import sys
from pathlib import Path

from ipbench import (
    DenseLdlBackend,
    SparseLdlBackend,
    analytic_suite,
    calibrate,
    generate,
    performance_profile,
    plot_profiles,
    run_matrix,
    write_records,
)
from ipbench.bench import write_calibration, write_profiles

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")

problems = [generate("bc2d", n) for n in (4, 8, 12)] + [generate("dist2d", n) for n in (4, 8)]
problems += [g for g in analytic_suite() if g.expected_status == "Optimal"]
backends = {"sparse": SparseLdlBackend(), "dense": DenseLdlBackend()}

records = run_matrix(problems, backends, repetitions=2)
print(f"records: {write_records(records, out / 'records.csv')}")
for r in records:
    if r.repetition == 0:
        print(f"  {r.problem_id:<12} {r.backend_id:<7} {r.status:<10} {r.wall_seconds:.3f}s")

profile = performance_profile(records)
for curve in profile.all_curves():
    print(f"{curve.backend_id:<14} solved {curve.solved}/{curve.total_problems}, "
          f"first at {curve.points[0][0]:.3f}s" if curve.points else f"{curve.backend_id}: none solved")
write_profiles(profile, out / "profiles")
print(f"plot: {plot_profiles(profile, out / 'profiles' / 'profile.svg')}")

result = calibrate(generate("bc3d", 6), lambda w: SparseLdlBackend(workers=w),
                   worker_counts=[1, 2, 4], repetitions=2)
for w, mean in result.means.items():
    print(f"workers {w}: mean {mean:.3f}s, normalized {result.normalized[w]:.2f}")
print(f"best worker count {result.best_workers}")
write_calibration(result, out / "calibration.csv")
