"""Smoke test for the pacm extension module.

Build and install first, for example:
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/pacm-*.whl
"""

import pacm


def main():
    cfg = pacm.RunConfig("[mesh]\nnex = 20\nney = 10\n[analysis]\nfilter_radius = '2.5h'\n")
    cfg.max_iterations = 10
    print(cfg)

    an = pacm.Analysis(cfg)
    ev = an.evaluate([0.4] * an.n_elements)
    assert len(ev.gradient) == an.n_elements
    print(f"f0 at uniform 0.4: {ev.objective:.4f}, output displacement {ev.delta * 1e3:.4f} mm")

    res = pacm.optimize(cfg)
    assert res.iterations == 10
    assert abs(res.volume_fraction - cfg.volume_fraction) < 0.05
    print(f"after {res.iterations} iterations: f0 e/i/d {res.objectives}")

    loops = pacm.extract_contour(cfg, [1.0] * an.n_elements)
    assert len(loops) == 1

    deltas = pacm.verify(cfg, [1.0] * an.n_elements, [1e3])
    assert deltas[0] is not None
    print(f"solid block at 0.01 bar: {deltas[0] * 1e3:.6f} mm")

    try:
        pacm.RunConfig("[optimizer]\ndelta_eta = 0.7\n")
    except ValueError as e:
        print(f"rejected as expected: {e}")
    else:
        raise AssertionError("delta_eta = 0.7 was accepted")
    print("ok")


if __name__ == "__main__":
    main()
