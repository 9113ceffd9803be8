from torusrgg.selftest import CHECKS, run_selftest


def test_every_check_passes():
    results = run_selftest()
    assert len(results) == len(CHECKS)
    failed = [(r.name, r.detail) for r in results if not r.ok]
    assert not failed


def test_named_subset_and_crash_handling(monkeypatch):
    import torusrgg.selftest as st

    def crash():
        raise RuntimeError("boom")

    monkeypatch.setattr(st, "CHECKS", (("crashes", crash),) + CHECKS[:1])
    res = st.run_selftest(["crashes"])
    assert len(res) == 1 and not res[0].ok and "boom" in res[0].detail
