"""Quick end-to-end check of the Python bindings.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import math

import uavcov


def main():
    p = uavcov.Params()
    assert math.isclose(p.lambda_b, 1e-4)
    assert p.antenna == "directional" and p.beamwidth_deg == 120.0
    assert uavcov.Params.from_config(p.to_config()) == p

    omni = p.replace(antenna="omni", r_max=2000)
    assert omni.antenna == "omni" and omni.beamwidth_deg is None
    try:
        uavcov.Params(lambda_=3)
    except ValueError as e:
        assert "unknown key" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    sparse = uavcov.Params(lambda_b=20, kappa=0.1)
    a = uavcov.evaluate(sparse)
    for key, value in a.items():
        assert 0.0 <= value <= 1.0, (key, value)
    assert abs(a["association_los"] + a["association_nlos"] + a["void"] - 1.0) < 1e-4

    m = uavcov.simulate(sparse, trials=20_000, seed=3)
    for key in ("coverage", "handover"):
        mean, lo, hi = m[key]
        assert lo <= mean <= hi
        assert abs(a[key] - mean) <= max(0.02, 1.5 * (hi - lo)), (key, a[key], m[key])

    h = uavcov.conditional_handover("los", 50.0, 120.0, p)
    c = uavcov.conditional_coverage("los", 50.0, 120.0, p)
    assert 0.0 < h < 1.0 and 0.0 < c < 1.0

    csv = uavcov.sweep("kappa", [0.0, 1.0], sparse, metrics=["coverage"])
    rows = csv.strip().splitlines()
    assert rows[0].startswith("axis,value,metric") and len(rows) == 3

    print("coverage  analytic %.4f  simulated %.4f" % (a["coverage"], m["coverage"][0]))
    print("handover  analytic %.4f  simulated %.4f" % (a["handover"], m["handover"][0]))
    print("smoke test passed")


if __name__ == "__main__":
    main()
