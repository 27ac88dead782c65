from fractions import Fraction

import pytest

from ksim.generators import GeneratorSpec, generate
from ksim.harness import default_initial, run_shell
from ksim.marking import Marking, marking_f
from ksim.metric import build_hst, build_uniform, decompose
from ksim.offline import opt_cost
from ksim.verify import (CheckReport, check_ama_bound, check_lower_bound_demand,
                         check_lower_bound_mp, check_phase_costs_delta,
                         check_subroutine_contract, checks_to_csv,
                         deterministic_checks, run_lower_bound_suite)


def traced_record(extra=()):
    """The hand-traced two-block run: one phase end after six requests."""
    space = build_hst([2, 2], 2)
    dec = decompose(space, 0)
    seq = [2, 1, 3, 2, 3, 2] + list(extra)
    return run_shell(dec, 2, {0, 1}, seq, seed=42)


class TestLowerBoundDemand:
    def test_traced_run_is_tight(self):
        rec = traced_record()
        reports = check_lower_bound_demand(rec)
        assert len(reports) == 2  # completed phase 1 and the running phase 2
        first = reports[0]
        assert first.passed
        # block 0 demands 1 at cost 0, block 1 demands 2 at cost 0,
        # and one server must cross: rhs = Delta * (3 - 2) = 6 = lhs
        assert first.rhs == 6
        assert first.lhs == 6

    def test_every_phase_of_random_runs_passes(self):
        space = build_hst([3, 3], 3)
        dec = decompose(space, 0)
        seq = generate(GeneratorSpec("block_sweep", 40, seed=2,
                                     params={"width": 3, "passes": 4}), space)
        for seed in range(10):
            rec = run_shell(dec, 3, default_initial(3), seq, seed)
            assert all(r.passed for r in check_lower_bound_demand(rec))

    def test_empty_run(self):
        space = build_hst([2, 2], 2)
        dec = decompose(space, 0)
        rec = run_shell(dec, 2, {0, 1}, [], seed=0)
        reports = check_lower_bound_demand(rec)
        assert len(reports) == 1
        assert reports[0].passed  # 0 >= Delta * (0 - k)


class TestLowerBoundMp:
    def test_single_phase_sum_is_empty(self):
        rec = traced_record()
        rep = check_lower_bound_mp(rec)
        assert rep.passed
        assert rep.rhs == 0  # only phases after the first contribute

    def test_multi_phase_run(self):
        space = build_hst([3, 3], 3)
        dec = decompose(space, 0)
        seq = generate(GeneratorSpec("block_sweep", 60, seed=5,
                                     params={"width": 3, "passes": 4}), space)
        for seed in range(10):
            rec = run_shell(dec, 3, default_initial(3), seq, seed)
            rep = check_lower_bound_mp(rec)
            assert rep.passed
        # at least some seed reaches a second completed phase
        rec = run_shell(dec, 3, default_initial(3), seq, 3)
        assert rec.completed_phases >= 1


class TestPhaseCostsDelta:
    def test_non_final_phase_reaches_delta(self):
        rec = traced_record()
        reports = check_phase_costs_delta(rec)
        assert len(reports) == 1
        assert reports[0].lhs == 6  # exactly Delta: the bound is tight here
        assert reports[0].passed

    def test_single_phase_run_vacuous(self):
        space = build_hst([2, 2], 2)
        dec = decompose(space, 0)
        rec = run_shell(dec, 2, {0, 2}, [0, 2, 0, 2], seed=1)
        assert rec.completed_phases == 0
        assert check_phase_costs_delta(rec) == []


class TestAmaBound:
    def make_records(self, seeds, seq=None):
        space = build_hst([3, 4], 3)
        dec = decompose(space, 0)
        if seq is None:
            seq = generate(GeneratorSpec("block_sweep", 60, seed=5,
                                         params={"width": 3, "passes": 3}), space)
        return [run_shell(dec, 3, default_initial(3), seq, s) for s in range(seeds)]

    def test_requires_enough_seeds(self):
        records = self.make_records(5)
        with pytest.raises(ValueError, match="at least"):
            check_ama_bound(records, 3)

    def test_requires_identical_sequence(self):
        records = self.make_records(4)
        other = self.make_records(4, seq=[0, 1, 2, 3])
        with pytest.raises(ValueError, match="share"):
            check_ama_bound(records + other, 3, min_seeds=4)

    def test_bound_holds_on_sweep_instance(self):
        records = self.make_records(300)
        reports = check_ama_bound(records, 3, min_seeds=300)
        assert reports, "expected at least one completed phase"
        assert all(r.passed for r in reports)
        assert all(r.context["measured_constant"] <= 1.0986 for r in reports)

    def test_zero_jump_phase_passes_trivially(self):
        # one server per block, demands oscillate to the counts, donors never
        # exist when the phase ends: zero jumps, zero gain
        space = build_hst([2, 2], 2)
        dec = decompose(space, 0)
        seq = [2] + [0, 1] * 3
        records = [run_shell(dec, 2, {0, 2}, seq, s) for s in range(50)]
        assert all(rec.completed_phases >= 1 for rec in records)
        assert all(rec.phase_jump_counts[0] == 0 for rec in records)
        reports = check_ama_bound(records, 2, min_seeds=50)
        assert reports[0].lhs == 0
        assert reports[0].passed
        assert reports[0].advisory  # k = 2: log-degenerate, reported only


class TestSubroutineContract:
    def test_covered_requests_cost_nothing(self):
        metric = build_uniform(3, 1)
        initial = frozenset({0, 1})

        def make(seed):
            return Marking(metric, initial, seed)

        rep = check_subroutine_contract(make, metric, 2, [0, 1, 0], range(20),
                                        marking_f, 1, initial)
        assert rep.lhs == 0
        assert rep.passed

    def test_marking_on_adversarial_cycle(self):
        k = 3
        metric = build_uniform(k + 1, 1)
        initial = default_initial(k)
        seq = [i % (k + 1) for i in range(20 * (k + 1))]

        def make(seed):
            return Marking(metric, initial, seed)

        rep = check_subroutine_contract(make, metric, k, seq, range(400),
                                        marking_f, 1, initial)
        assert rep.passed
        assert rep.context["opt"] > 0


class TestReporting:
    def test_csv_shape(self):
        rep = CheckReport(name="x", phase=2, lhs=Fraction(1), rhs=Fraction(3),
                          passed=True, context={"seed": 9})
        text = checks_to_csv([rep])
        lines = text.strip().split("\n")
        assert lines[0] == "name,phase,lhs,rhs,margin,passed,seed"
        assert lines[1] == "x,2,1,3,2,1,9"

    def test_lower_bound_suite_passes(self):
        reports, ok = run_lower_bound_suite(runs_per_instance=2)
        assert ok
        assert any(r.name == "lower_bound_demand" for r in reports)
        assert any(r.name == "lower_bound_mp" for r in reports)
        assert any(r.name == "phase_cost_delta" for r in reports)

    def test_deterministic_checks_bundle(self):
        rec = traced_record()
        names = {r.name for r in deterministic_checks(rec)}
        assert names == {"lower_bound_demand", "lower_bound_mp", "phase_cost_delta"}
