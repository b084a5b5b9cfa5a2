import numpy as np

from omegacv.identities import DEFAULT_DOMAIN, random_function, random_omega, run_identity_suite
from omegacv.operators import OmegaFunction


def test_random_weights_are_increasing():
    rng = np.random.default_rng(0)
    grid = np.linspace(*DEFAULT_DOMAIN, 101)
    for _ in range(200):
        assert np.all(random_omega(rng).prime(grid) > 0)


def test_random_functions_are_deterministic():
    a = [random_function(np.random.default_rng(9)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_suite_passes_on_fixed_weight():
    w = OmegaFunction("2*exp(x/2)", (0.2, 1.0))
    rows = run_identity_suite(seed=4, instances=15, omega=w)
    assert all(r.passed for r in rows), [r for r in rows if not r.passed]


def test_fault_is_isolated():
    rows = {r.name: r for r in run_identity_suite(seed=1, instances=10, fault="product")}
    assert not rows["product rule"].passed
    assert all(r.passed for name, r in rows.items() if name != "product rule")


def test_reproducible():
    first = run_identity_suite(seed=3, instances=5)
    second = run_identity_suite(seed=3, instances=5)
    assert [r.max_error for r in first] == [r.max_error for r in second]
