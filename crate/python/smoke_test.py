"""Smoke test for the gbdeer Python bindings.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import math
import pathlib

import gbdeer

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check_helpers():
    r = gbdeer.cell_size(250.0)
    assert math.isclose(r, 250.0 / math.sqrt(5.0))
    assert gbdeer.cell_of(r, 0.0, 250.0, 1000.0, 1000.0) == (1, 0)
    assert gbdeer.handshake(50.0) == ("Tmin", 1)
    assert gbdeer.handshake(100.0) == ("Tmid", 2)
    assert gbdeer.handshake(300.0) is None
    assert gbdeer.adjust_range(160.0, 5.0, 2.0, "away") == (170.0, "Tmax", False)
    assert gbdeer.adjust_range(160.0, 50.0, 10.0, "toward")[0] == 80.0
    assert gbdeer.mutual_separation(2.0, 3.0, 1.0, 4.0) == 10.0
    assert gbdeer.weight(5.0, 5.0, 0.0, 5.0) == 1.0
    assert math.isclose(gbdeer.depart_time(50.0, 50.0, 10.0, 0.0, 250.0, 1000.0, 1000.0), (r - 50.0) / 10.0)
    edges, total = gbdeer.build_mst([(0, 0), (3, 4), (6, 8)])
    assert len(edges) == 2 and math.isclose(total, 10.0)


def check_run():
    cfg = gbdeer.Config.load(str(ROOT / "configs" / "handover.toml"))
    result = gbdeer.run(cfg, check_invariants=True)
    m = result.metrics
    assert m["handover_count"] == 1, m
    assert m["dropped"] == 0 and m["rediscovery_count"] == 0, m
    assert result.violations == []
    assert result.routes() == [[0, 2, 3]]
    assert result.trace_csv().startswith("t,seq,kind,subject_ids,detail")
    again = gbdeer.run(cfg)
    assert again.trace_csv() == result.trace_csv()
    assert again.metrics_document() == result.metrics_document()

    small = gbdeer.Config()
    small.n_nodes = 20
    small.duration = 20.0
    small.add_flow(0, 19, 1.0, 1.0, 20.0)
    for name in gbdeer.PROTOCOLS:
        small.protocol = name
        out = gbdeer.run(small)
        assert abs(out.ledger_total() - out.metrics["energy_total"]) < 1e-9
    try:
        small.protocol = "bogus"
    except ValueError as e:
        assert "minhop" in str(e)
    else:
        raise AssertionError("bogus protocol accepted")

    bad = gbdeer.Config()
    bad.handover_threshold = bad.e_init
    try:
        bad.validate()
    except ValueError as e:
        assert "handover_threshold < e_init" in str(e)
    else:
        raise AssertionError("invalid config accepted")


if __name__ == "__main__":
    check_helpers()
    check_run()
    print("python smoke test ok")
