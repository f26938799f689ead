"""Smoke test for the pyinfoflow extension.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import json
import math

import pyinfoflow as pf


def main():
    grid = pf.TimeGrid(1.0, 10)
    assert len(grid.times) == 11 and grid.times[-1] == 1.0

    b1, b2 = grid.bridge_pair(0.0, 7)
    assert b1[0] == 0.0 and b1[-1] == 0.0 and b2[-1] == 0.0
    xi = grid.signal_path(1.0, 0.5, 7)
    assert math.isclose(xi[-1], 0.5)

    info = pf.Information(1.0, 0.5, 0.3, 1.0)
    mean, var = info.posterior(pf.PayoffModel.gaussian())
    # kappa = 2 at t = 1/2, so A = 0.6 and B = 1.
    assert math.isclose(mean, 0.3) and math.isclose(var, 0.5)
    price = info.price(pf.PayoffModel.digital(0.0, 1.0, 0.5, 0.5), 0.05)
    assert 0.0 < price < 1.0

    bid, ask = info.cara_quotes(0.5, 0.0)
    assert bid < mean < ask
    assert bid <= pf.cara_clearing_price(ask, bid, 1.0, 1.0) <= ask

    a, b = pf.ab_coefficients(0.5, 0.0, 0.5, 1.0)
    assert b > 0.0
    assert pf.expected_profit(0.5, 0.0, 0.5, 1.0, 1, 0.5) > 0.0
    assert pf.expected_profit(0.5, 0.0, 0.5, 1.0, 0, 0.5) < 0.0
    assert 0.0 < pf.p_correct_digital(0.5, 0.0, 0.5, 1.0, 1) < 1.0
    value, flags = pf.optimal_schedule(10, 0.5, 1.0, 1, 0.5)
    assert value > 0.0 and len(flags) == 9

    cfg = json.loads(pf.default_config())
    cfg["paths"] = 200
    result = json.loads(pf.run_experiment(json.dumps(cfg), threads=2))
    assert result["paths"] == 200
    totals = [t["mean"] for t in result["terminal"]]
    assert abs(sum(totals)) < 1e-9
    assert totals[1] > 0.0, totals

    cfg.update(scenario="strategic", payoff={"kind": "gaussian"}, true_x=0.5)
    cfg["agents"] = [{"sigma": 0.5}, {"sigma": 1.0}]
    rows = json.loads(pf.analyze(json.dumps(cfg)))
    assert rows and all(r["h"] > 0.0 for r in rows if r["agent"] == 1)
    report = json.loads(pf.strategy_report(json.dumps(cfg)))
    for v, e in zip(report["optimum"], report["enumerated"]):
        assert abs(v - e) < 1e-12

    try:
        pf.run_experiment('{"auctions": 0}')
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")

    print("pyinfoflow smoke test passed")


if __name__ == "__main__":
    main()
