import pytest

from nbprocess.model import (Hyperparams, ModelSpec, Schedule, UnknownVariantError, spec_from_dict,
                             spec_to_dict)


def test_defaults():
    hp = Hyperparams()
    assert (hp.a0, hp.b0, hp.e0, hp.f0, hp.c, hp.eta) == (0.01, 0.01, 0.01, 0.01, 1.0, 0.05)


@pytest.mark.parametrize("kw", [dict(a0=0), dict(eta=-1), dict(K=0), dict(K=2.5), dict(K=4, bp_mass=4)])
def test_invalid_hyperparams(kw):
    with pytest.raises(ValueError):
        Hyperparams(**kw)


def test_schedule_collects_last_samples():
    s = Schedule()
    assert s.collected == 1500
    assert not s.collects(999) and s.collects(1000) and s.collects(2499)
    thin = Schedule(iterations=100, burn_in=40, warmup=10, thin=3)
    assert thin.collected == len([i for i in range(100) if thin.collects(i)]) == 20


@pytest.mark.parametrize("kw", [dict(iterations=10, burn_in=10), dict(burn_in=10, warmup=11),
                                dict(thin=0)])
def test_invalid_schedule(kw):
    with pytest.raises(ValueError):
        Schedule(**kw)


def test_unknown_variant():
    with pytest.raises(UnknownVariantError):
        ModelSpec("lda-plus")


def test_spec_roundtrip():
    spec = ModelSpec("beta-nb", Hyperparams(K=33, eta=0.1), Schedule(300, 100, 20, 2))
    assert spec_from_dict(spec_to_dict(spec)) == spec
