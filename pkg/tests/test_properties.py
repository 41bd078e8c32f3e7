from fracmg.properties import run_property_checks


def test_all_property_checks_pass():
    results = run_property_checks(seed=0)
    assert len(results) == 6
    for res in results:
        assert res.passed, f"{res.name}: {res.detail}"


def test_check_names_stable():
    names = [r.name for r in run_property_checks(seed=1)]
    assert names == [
        "gram-symmetry K/H/G",
        "hessian-coercivity",
        "two-grid-round-trip",
        "projection-of-embedding-is-identity",
        "eigenvalue-sandwich",
        "mgcg-vs-dense-direct",
    ]
