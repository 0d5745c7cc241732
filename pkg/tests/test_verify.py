from cltlab import multilinear as ml
from cltlab.harness import verify


def test_full_suite_green():
    results = verify.run_verify_suite(0)
    failed = [c.name for c in results if not c.passed]
    assert not failed, failed
    assert len({c.name for c in results}) == len(results)


def test_rosenthal_rademacher_p2():
    results = verify.rosenthal_checks(0)
    assert all(c.passed for c in results)


def test_mutation_detected(monkeypatch):
    original = ml._he_table

    def flipped(x, k):
        table = original(x, k).copy()
        if table.shape[-1] > 2:
            table[..., 2] = -table[..., 2]
        return table

    monkeypatch.setattr(ml, "_he_table", flipped)
    results = {c.name: c for c in verify.hermite_checks(0, n_mc=100_000)}
    caught = [name for name, c in results.items() if not c.passed]
    assert "multilinear.hermite_closed_forms" in caught or "multilinear.hermite_recurrence" in caught, caught
