"""Smoke test for the `bigvamp` extension module.

Build and install first, e.g.

    maturin build --release -m crates/bigvamp-py/Cargo.toml
    pip install target/wheels/bigvamp-*.whl
"""

import math

import bigvamp


def main():
    inst = bigvamp.Instance(200, 100, 10, 30.0, seed=3)
    n, m, r = inst.shape
    assert (n, m, r) == (200, 100, 10)
    assert len(inst.y) == n and len(inst.y[0]) == m

    sol = inst.solve("bivamp")
    print(sol)
    assert sol.termination == "converged", sol.termination
    assert len(sol.z_hat) == n and len(sol.u_hat[0]) == r

    amp = inst.solve("baseline_amp")
    assert abs(sol.nrmse - amp.nrmse) / amp.nrmse < 0.05

    preds, converged = bigvamp.state_evolution(200, 100, 10, 30.0)
    assert converged
    assert abs(sol.nrmse - preds[-1]) / preds[-1] < 0.25, (sol.nrmse, preds[-1])

    hist = sol.nrmse_history
    assert hist and math.isclose(hist[-1], sol.nrmse, rel_tol=1e-9)

    rows = bigvamp.sweep("custom", [0.0, 20.0], n_trials=2, se_overlay=True)
    assert [r["snr_db"] for r in rows] == [0.0, 20.0]
    assert rows[1]["nrmse_mean"] < rows[0]["nrmse_mean"]

    try:
        bigvamp.Instance(10, 10, 20, 10.0)
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("rank larger than the matrix was accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
