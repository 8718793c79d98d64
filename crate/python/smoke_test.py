"""Smoke test for the ptns Python extension.

Build and install the extension first, for example:

    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release
    python python/smoke_test.py
"""

import math

import ptns


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    g = ptns.Grid(16, 16)
    assert g.node_count == 17 * 17
    xs, ys = g.coords()

    # gradient of a linear field is exact
    f = [2.0 * x - 3.0 * y for x, y in zip(xs, ys)]
    gx, gy = ptns.grad(g, f)
    assert close(gx, [2.0] * len(f), 1e-12) and close(gy, [-3.0] * len(f), 1e-12)

    s = [math.sin(math.pi * x) * math.sin(math.pi * y) for x, y in zip(xs, ys)]
    lap = ptns.laplacian(g, s)
    exact = [-2.0 * math.pi**2 * v for v in s]
    assert max(abs(a - b) for a, b in zip(lap, exact)) < 0.1

    assert abs(ptns.norm(g, [1.0] * len(f), 2) - 1.0) < 1e-12
    assert ptns.norm(g, s, "inf") == max(s)
    assert ptns.bmo(g, s) > 0.0

    # Lame round trip: solve then apply recovers the forcing in the interior
    ux, uy = ptns.solve_lame(g, s, [0.0] * len(s))
    fx, fy = ptns.apply_lame(g, ux, uy)
    interior = [k for k in range(len(s)) if 0 < k % 17 < 16 and 0 < k // 17 < 16]
    assert max(abs(fx[k] - s[k]) for k in interior) < 1e-8

    rho = [1.0 + 0.1 * v for v in s]
    z = [1.2 + 0.2 * v for v in s]
    theta = ptns.theta_transform(g, rho, z)
    assert close(ptns.z_transform(g, rho, theta), z, 1e-14)
    assert close(ptns.pressure(g, [1.0] * len(s)), [1.0] * len(s), 0.0)

    # sin(pi) is not exactly zero in floating point; no-slip wants exact zeros
    u = [0.01 * s[k] if k in interior else 0.0 for k in range(len(s))]
    out = ptns.solve_window(g, u, [-v for v in u], rho, z, t_window=0.05, n_steps=5)
    assert out["report"]["converged"] and abs(out["t_end"] - 0.05) < 1e-12

    run = ptns.simulate("nx = 8\nny = 8\nt_final = 0.05\nvelocity = sine\nvelocity_amplitude = 0.01\n")
    assert run["termination"] == "completed"
    assert len(run["records"]) > 1 and run["records"][0]["t"] == 0.0

    try:
        ptns.simulate("nx = 8\nbogus = 1\n")
    except ptns.PtnsError as e:
        assert "bogus" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    scan = ptns.scan_estimates(qs=[2.0], levels=[8, 16], samples=2, seed=1)
    assert scan["samples"] and all(c["spread"] >= 1.0 for c in scan["summary"])

    print("python smoke test passed")


if __name__ == "__main__":
    main()
