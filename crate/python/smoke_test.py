"""Smoke test for the solmanifold Python module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml --release`,
or copy target/release/libsolmanifold.so next to this file as solmanifold.so.
"""

import json
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import solmanifold as sm


def main():
    grid = sm.RadialGrid(40.0, 1601)
    assert abs(grid.dr - 0.025) < 1e-15

    phi = sm.RadialField.soliton(grid)
    assert abs(phi.values()[0] - 3 ** 0.25) < 1e-12

    spectrum = sm.Spectrum(grid)
    print(f"k = {spectrum.k:.10f}, residual = {spectrum.residual:.2e}, c_Q = {spectrum.c_q:.10f}")
    assert abs(spectrum.k - 1.9059) < 2e-3
    assert spectrum.negative_count == 1

    # free sine of a bump at t = 0 vanishes
    bump = sm.RadialField(grid, [math.exp(-((r - 1.0) ** 2)) for r in grid.nodes()])
    assert sm.free_sine(bump, 0.0).l2_norm() == 0.0

    energies, exit_kind = sm.evolve(phi.scale(0.9), phi.scale(0.0), 5.0, stride=20)
    drift = max(abs(e - energies[0]) for e in energies) / abs(energies[0])
    print(f"energy drift over [0,5] = {drift:.2e} ({exit_kind})")
    assert drift < 1e-4

    eps = 1e-3
    u0 = spectrum.project_continuous(bump).scale(eps)
    zero = bump.scale(0.0)
    h_shoot = sm.manifold_h(spectrum, u0, zero, 20.0, "shoot")
    h_picard = sm.manifold_h(spectrum, u0, zero, 20.0, "picard")
    print(f"h: shoot {h_shoot:+.6e}, picard {h_picard:+.6e}")
    assert abs(h_shoot - h_picard) < 1e-3 * eps**2

    cfg = sm.default_config("pairing_identity")
    assert sm.validate(cfg) == []
    passed, report = sm.run_experiment(cfg)
    for check in json.loads(report)["checks"]:
        print(("PASS " if check["passed"] else "FAIL ") + check["name"])
    assert passed

    try:
        sm.RadialGrid(-1.0, 10)
    except ValueError:
        pass
    else:
        raise AssertionError("negative radius accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
