"""Engine-versus-oracle equivalence on random graphs, plus cycle safety.

The oracle (tests/oracle.py) is a naive scan-until-stable fixpoint over
plain JSON scenarios; the engine runs the same scenario through the real
Graph + Interface. Final property values and versions must agree
bit-exactly, as must per-wave outcomes.
"""

import time

from generators import cyclic_scenario, random_scenario
from harness import drive_scenario
import oracle


def _compare(seed: int, scenario: dict) -> None:
    o_values, o_versions, o_outcomes = oracle.run(scenario)
    snapshot, outcomes = drive_scenario(scenario)
    expected = {key: (o_values[key], o_versions[key]) for key in o_values}
    assert snapshot == expected, f"seed {seed}: final state diverged"
    assert len(outcomes) == len(o_outcomes), f"seed {seed}"
    for i, ((status, staged, triggers), (o_status, o_staged, o_triggers)) in \
            enumerate(zip(outcomes, o_outcomes)):
        assert status == o_status, f"seed {seed} wave {i}"
        assert staged == o_staged, f"seed {seed} wave {i}"
        assert sorted(triggers) == sorted(o_triggers), f"seed {seed} wave {i}"


def test_oracle_equivalence_100_seeds():
    start = time.monotonic()
    for seed in range(100):
        _compare(seed, random_scenario(seed))
    assert time.monotonic() - start < 10.0


def test_oracle_agrees_on_constructed_cycles():
    for seed in range(20):
        scenario = cyclic_scenario(seed)
        o_values, o_versions, o_outcomes = oracle.run(scenario)
        snapshot, outcomes = drive_scenario(scenario)
        assert [s for s, _, _ in outcomes] == ["cycle_error"]
        assert [s for s, _, _ in o_outcomes] == ["cycle_error"]
        assert snapshot == {k: (o_values[k], o_versions[k]) for k in o_values}
