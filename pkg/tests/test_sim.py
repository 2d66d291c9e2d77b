import math

import numpy as np
import pytest

import attralloc as al


def _tiny_instances(n=2, set_name="A"):
    spec = al.problem_set(set_name)
    rng = np.random.default_rng(500)
    return [
        al.generate_instance(spec, "A", "risk-neutral", rng, f"{set_name}-A-rn-{i:02d}")
        for i in range(n)
    ]


class TestAllocationEntropy:
    def test_zero_when_nothing_sampled(self):
        assert al.allocation_entropy(np.zeros((3, 2), dtype=int), 0) == 0.0

    def test_exactly_log_n_when_counts_equal(self):
        counts = np.full((12, 3), 5, dtype=int)
        # exact equality, not approx: the equal-count case short-circuits
        assert al.allocation_entropy(counts, 180) == math.log(36)
        one = np.zeros((3, 2), dtype=int)
        one[1, 1] = 4
        assert al.allocation_entropy(one, 4) == 0.0

    def test_general_mixture(self):
        counts = np.array([[3, 1], [0, 0]])
        expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        assert al.allocation_entropy(counts, 4) == pytest.approx(expected, abs=1e-15)

    def test_rejects_inconsistent_totals(self):
        with pytest.raises(ValueError):
            al.allocation_entropy(np.array([[1, 1]]), 3)
        with pytest.raises(ValueError):
            al.allocation_entropy(np.array([[-1, 2]]), 1)


class TestChildSeed:
    def test_deterministic_and_distinct(self):
        a = al.child_seed(7, 1, 2, 3)
        b = al.child_seed(7, 1, 2, 3)
        assert a.entropy == b.entropy
        assert (
            np.random.default_rng(a).random() == np.random.default_rng(b).random()
        )
        seen = {
            al.child_seed(7, ii, pi, r).entropy
            for ii in range(3)
            for pi in range(3)
            for r in range(3)
        }
        assert len(seen) == 27


class TestRunExperiment:
    def test_worker_count_does_not_change_results(self):
        instances = _tiny_instances(2)
        policies = [
            al.PolicyConfig(12, 0, "I"),
            al.PolicyConfig(36, 36, "II"),
        ]
        seq = al.run_experiment(instances, policies, 2, rng_root=99, workers=1)
        par = al.run_experiment(instances, policies, 2, rng_root=99, workers=2)
        assert len(seq) == len(par) == 8
        for a, b in zip(seq, par):
            assert a.instance_id == b.instance_id
            assert a.replication == b.replication
            for col in ("alt", "attr", "sample", "selected", "oc", "correct", "entropy"):
                assert np.array_equal(getattr(a, col), getattr(b, col)), col

    def test_order_is_instance_policy_replication(self):
        instances = _tiny_instances(2)
        policies = [al.PolicyConfig(6, 0, "I"), al.PolicyConfig(36, 36, "I")]
        traces = al.run_experiment(instances, policies, 2, rng_root=1)
        meta = [(t.instance_id, t.uniform_phase, t.replication) for t in traces]
        assert meta == [
            (inst.instance_id, pol.uniform_phase, rep)
            for inst in instances
            for pol in policies
            for rep in range(2)
        ]

    def test_progress_callback_sees_every_unit(self):
        instances = _tiny_instances(1)
        policies = [al.PolicyConfig(36, 36, "I")]
        calls = []
        al.run_experiment(
            instances, policies, 1, rng_root=5, progress=lambda d, n: calls.append((d, n))
        )
        assert calls == [(1, 1)]


class TestAggregate:
    def test_groups_and_stage_means(self):
        instances = _tiny_instances(2)
        policies = [al.PolicyConfig(36, 0, "I"), al.PolicyConfig(36, 36, "II")]
        traces = al.run_experiment(instances, policies, 3, rng_root=11)
        rows = al.aggregate(traces)
        assert len(rows) == 2 * 36
        by_policy = {}
        for row in rows:
            assert row.set_name == "A"
            assert row.runs == 6
            by_policy.setdefault((row.uniform_phase, row.rule), []).append(row)
        assert set(by_policy) == {(0, "I"), (36, "II")}
        for stages in by_policy.values():
            assert [r.stage for r in stages] == list(range(1, 37))
        # spot check one cell against a direct mean
        want = np.mean(
            [t.oc[2] for t in traces if t.uniform_phase == 0][:6]
        )
        got = next(r for r in rows if r.uniform_phase == 0 and r.stage == 3)
        assert got.mean_oc == pytest.approx(float(want), abs=1e-15)

    def test_mixed_budgets_rejected(self):
        instances = _tiny_instances(1)
        t1 = al.run_experiment(instances, [al.PolicyConfig(6, 0, "I")], 1, 2)
        t2 = al.run_experiment(instances, [al.PolicyConfig(12, 0, "I")], 1, 2)
        with pytest.raises(ValueError):
            al.aggregate(t1 + t2)


class TestCompare:
    def test_welch_t_frozen_example(self):
        rows_a = [(1.0, True), (2.0, True), (3.0, True), (4.0, True)]
        rows_b = [(2.0, True), (4.0, True), (6.0, True), (8.0, True)]
        res = al.compare(rows_a, rows_b)
        assert res.t_stat == pytest.approx(-math.sqrt(3), abs=1e-10)
        assert res.mean_oc_a == 2.5 and res.mean_oc_b == 5.0

    def test_proportion_ci_frozen_example(self):
        rows_a = [(0.0, i < 171) for i in range(200)]
        rows_b = [(0.0, i < 142) for i in range(200)]
        res = al.compare(rows_a, rows_b)
        assert res.share_correct_a == pytest.approx(0.855)
        assert res.share_correct_b == pytest.approx(0.710)
        assert res.diff_correct == pytest.approx(0.145, abs=1e-12)
        half = 1.96 * math.sqrt(0.855 * 0.145 / 200 + 0.71 * 0.29 / 200)
        assert half == pytest.approx(0.0796005, abs=1e-7)
        assert res.ci_low == pytest.approx(0.145 - half, abs=1e-12)
        assert res.ci_high == pytest.approx(0.145 + half, abs=1e-12)
        assert res.selection_verdict == "better"

    def test_antisymmetry(self):
        rng = np.random.default_rng(8)
        rows_a = [(float(x), bool(c)) for x, c in zip(rng.random(30), rng.random(30) < 0.6)]
        rows_b = [(float(x), bool(c)) for x, c in zip(rng.random(30), rng.random(30) < 0.4)]
        ab = al.compare(rows_a, rows_b)
        ba = al.compare(rows_b, rows_a)
        assert ab.t_stat == pytest.approx(-ba.t_stat, abs=1e-12)
        assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)
        assert ab.diff_correct == pytest.approx(-ba.diff_correct, abs=1e-12)
        assert ab.ci_low == pytest.approx(-ba.ci_high, abs=1e-12)
        flip = {"better": "worse", "worse": "better"}
        assert ba.oc_verdict == flip.get(ab.oc_verdict, ab.oc_verdict)
        assert ba.selection_verdict == flip.get(
            ab.selection_verdict, ab.selection_verdict
        )

    def test_zero_variance_cases(self):
        same = [(0.5, True)] * 5
        res = al.compare(same, [(0.5, True)] * 7)
        assert res.t_stat == 0.0 and res.p_value == 1.0
        assert res.oc_verdict == "indistinguishable"
        res = al.compare(same, [(0.9, True)] * 7)
        assert res.t_stat == -math.inf and res.p_value == 0.0
        assert res.oc_verdict == "better"

    def test_insufficient_data(self):
        with pytest.raises(al.InsufficientData):
            al.compare([(0.1, True)], [(0.2, False), (0.3, False)])


def test_final_rows_reads_last_stage():
    traces = al.run_experiment(_tiny_instances(1), [al.PolicyConfig(36, 36, "I")], 2, 3)
    rows = al.final_rows(traces)
    assert rows == [
        (float(t.oc[-1]), bool(t.correct[-1])) for t in traces
    ]


class TestSamplingBehavior:
    def test_counts_match_manual_tally(self):
        instances = _tiny_instances(1)
        traces = al.run_experiment(instances, [al.PolicyConfig(12, 0, "II")], 3, 17)
        sb = al.sampling_behavior(traces)
        assert sb.runs == 3
        assert sb.m == 12 and sb.k == 3
        assert len(sb.share_by_rank) == 12
        assert len(sb.share_by_attribute) == 3
        assert sum(sb.share_by_rank) == pytest.approx(1.0, abs=1e-12)
        assert sum(sb.share_by_attribute) == pytest.approx(1.0, abs=1e-12)
        # manual tally of the distinct pair count of the first run
        pairs = {(a, b) for a, b in zip(traces[0].alt, traces[0].attr)}
        want = np.mean([t.distinct_pairs() for t in traces])
        assert len(pairs) == traces[0].distinct_pairs()
        assert sb.mean_distinct_pairs == pytest.approx(float(want), abs=1e-12)

    def test_uniform_run_touches_every_pair(self):
        instances = _tiny_instances(1)
        traces = al.run_experiment(instances, [al.PolicyConfig(36, 36, "I")], 1, 2)
        sb = al.sampling_behavior(traces)
        assert sb.mean_distinct_pairs == 36.0
        assert np.allclose(sb.share_by_attribute, 1 / 3, atol=1e-12)
        assert np.allclose(sb.share_by_rank, 1 / 12, atol=1e-12)


class TestTraceCsv:
    def test_round_trip_is_exact(self, tmp_path):
        instances = _tiny_instances(2)
        policies = [al.PolicyConfig(36, 36, "I"), al.PolicyConfig(12, 0, "II")]
        traces = al.run_experiment(instances, policies, 2, rng_root=23)
        path = tmp_path / "traces.csv"
        al.write_trace_csv(traces, path)
        back = al.read_trace_csv(path)
        assert len(back) == len(traces)
        for a, b in zip(traces, back):
            assert b.instance_id == a.instance_id
            assert b.replication == a.replication
            assert b.uniform_phase == a.uniform_phase
            assert b.rule == a.rule
            for col in (
                "stage",
                "alt",
                "attr",
                "sample",
                "selected",
                "oc",
                "correct",
                "entropy",
                "ms",
            ):
                assert np.array_equal(getattr(a, col), getattr(b, col)), col

    def test_header_and_line_endings_frozen(self, tmp_path):
        traces = al.run_experiment(
            _tiny_instances(1), [al.PolicyConfig(36, 36, "I")], 1, 31
        )
        path = tmp_path / "t.csv"
        al.write_trace_csv(traces, path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        header = raw.split(b"\n", 1)[0].decode()
        assert header == ",".join(al.TRACE_COLUMNS)
        assert header.startswith("instance,replication,H,rule,stage")

    def test_read_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            al.read_trace_csv(path)


class TestTraceValidate:
    def test_catches_inconsistencies(self):
        traces = al.run_experiment(
            _tiny_instances(1), [al.PolicyConfig(36, 36, "I")], 1, 37
        )
        tr = traces[0]
        tr.validate()
        tr.oc[2] = -0.5
        with pytest.raises(ValueError):
            tr.validate()
        tr.oc[2] = 0.5
        tr.correct[2] = True
        with pytest.raises(ValueError):
            tr.validate()
