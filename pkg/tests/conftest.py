import pytest

from racemarket.race import Competitor, RaceConfig, UniformSteps


def make_race(n=4, lo=10.0, hi=20.0, length=500.0, **kwargs) -> RaceConfig:
    comps = tuple(Competitor(cid=f"c{i + 1}", steps=UniformSteps(lo, hi)) for i in range(n))
    return RaceConfig(track_length=length, competitors=comps, **kwargs)


@pytest.fixture
def race4() -> RaceConfig:
    return make_race()
